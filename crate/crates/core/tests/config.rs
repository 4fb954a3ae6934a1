mod common;

use std::f64::consts::PI;

use miw_core::config::{
    argmin_objective_2d, build_excited_state, build_ground_state, build_state, circular_abs,
    even_allocation, g2_cdf, g3_raw, hamiltonian, objective_2d, objective_3d, optimize_counts,
    optimize_counts_2d, optimize_counts_3d, optimize_counts_d, penalty_l, polar_grid,
    potential_terms, AngularLaw, CountPlan, StateSpec,
};
use miw_core::radial::solve_ground_state;
use miw_core::wasser::w1_empirical_vs_uniform_angles;
use miw_core::{MiwConfiguration64, MiwError};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn circular_distance_and_penalty() {
    assert!((circular_abs(0.1, PI - 0.1, PI) - 0.2).abs() < 1e-15);
    assert_eq!(circular_abs(0.0, 0.0, 2.0 * PI), 0.0);
    assert_eq!(circular_abs(1.0, 2.0, 2.0 * PI), 1.0);
    assert_eq!(penalty_l(0.0), 1.0);
    assert_eq!(penalty_l(2.0), 1.0);
    assert_eq!(penalty_l(10.0), 5.0);
}

#[test]
fn two_dimensional_plans() {
    let p = optimize_counts_2d(484).unwrap();
    assert_eq!(p.m_shells, 22);
    assert!(p.n_per_direction[0].iter().all(|&n| n == 22));

    let p = optimize_counts_2d(4).unwrap();
    let brute = (1..=2)
        .min_by(|&a, &b| objective_2d(4, a).partial_cmp(&objective_2d(4, b)).unwrap())
        .unwrap();
    assert!([1, 2].contains(&p.m_shells) && [1, 2].contains(&brute));
    assert!(p.n_per_direction[0].iter().all(|&n| n >= 2));
    assert!(optimize_counts_2d(3).is_err());
}

#[test]
fn allocation_of_487_points() {
    let p = optimize_counts_2d(487).unwrap();
    assert_eq!(p.m_shells, 22);
    let row = &p.n_per_direction[0];
    assert_eq!(row.iter().sum::<usize>(), 487);
    let big: Vec<usize> = (0..22).filter(|&j| row[j] == 23).collect();
    assert_eq!(big.len(), 3);
    assert!(row.iter().all(|&n| n == 22 || n == 23));
    assert!(
        big.windows(2).all(|w| w[1] == w[0] + 1),
        "not contiguous: {big:?}"
    );
    assert!(p.unequal_ring_pairs()[0] <= 2);
    // No placement of three larger directions has fewer unequal neighbour pairs.
    let mut best = usize::MAX;
    for a in 0..22 {
        for b in a + 1..22 {
            for c in b + 1..22 {
                let mut r = [22usize; 22];
                r[a] = 23;
                r[b] = 23;
                r[c] = 23;
                let pairs = (0..22).filter(|&j| r[j] != r[(j + 1) % 22]).count();
                best = best.min(pairs);
            }
        }
    }
    assert_eq!(p.unequal_ring_pairs()[0], best);
}

#[test]
fn asymptotic_two_dimensional_direction_count() {
    // The integer objective's minimiser stays within one of √N.
    for n in [100usize, 484, 1000, 5000] {
        let exact = argmin_objective_2d(n) as f64;
        assert!((exact - (n as f64).sqrt()).abs() <= 1.5, "N={n}: {exact}");
        let plan = optimize_counts_2d(n).unwrap();
        assert!((plan.m_shells as f64 - exact).abs() <= 1.0);
    }
}

#[test]
fn three_dimensional_plans() {
    let p = optimize_counts_3d(2744).unwrap();
    assert_eq!(p.uniform_shape(), Some((7, 28, 14)));
    let scan = (1..=20usize)
        .min_by(|&a, &b| {
            objective_3d(2744, a)
                .partial_cmp(&objective_3d(2744, b))
                .unwrap()
        })
        .unwrap();
    assert_eq!(scan, 7);

    let p = optimize_counts_3d(512).unwrap();
    assert_eq!(p.uniform_shape(), Some((4, 16, 8)));
    let scan = (1..=20usize)
        .min_by(|&a, &b| {
            objective_3d(512, a)
                .partial_cmp(&objective_3d(512, b))
                .unwrap()
        })
        .unwrap();
    assert_eq!(scan, 4);
    assert!(optimize_counts_3d(7).is_err());
}

#[test]
fn higher_dimensional_plans() {
    let p = optimize_counts_d(4096, 4).unwrap();
    assert_eq!(p.m_shells, 4);
    assert_eq!(p.shell_totals().iter().sum::<usize>(), 4096);
    assert!(p
        .n_per_direction
        .iter()
        .flatten()
        .all(|&n| n.abs_diff(23) <= 1));
    p.validate().unwrap();

    let p = optimize_counts(100_000, 5).unwrap();
    assert_eq!(p.shell_totals().iter().sum::<usize>(), 100_000);
    assert!(p.n_per_direction.iter().flatten().all(|&n| n >= 2));

    assert!(matches!(
        optimize_counts_d(32, 4),
        Err(MiwError::Infeasible(_))
    ));
    assert!(optimize_counts(100, 1).is_err());
}

#[test]
fn even_allocation_runs() {
    assert_eq!(even_allocation(10, 4), vec![3, 3, 2, 2]);
    assert_eq!(even_allocation(8, 4), vec![2, 2, 2, 2]);
    assert!(even_allocation(5, 0).is_empty());
}

#[test]
fn polar_grid_examples() {
    let g = polar_grid::<f64>(2, 3).unwrap();
    assert_eq!(g[0], 0.0);
    assert!((g[1] - PI / 2.0).abs() < 1e-15);
    let g = polar_grid::<f64>(7, 3).unwrap();
    assert!((g[1] - (5.0f64 / 6.0).acos()).abs() < 1e-14);
    let g = polar_grid::<f64>(5, 5).unwrap();
    for (j, &t) in g.iter().enumerate() {
        let f5 = 1.0 - 1.5 * t.cos() + 0.5 * t.cos().powi(3);
        assert!((f5 - j as f64 / 4.0).abs() < 1e-12, "j={j}");
    }
    assert!(g.windows(2).all(|w| w[0] < w[1]));
    assert!(polar_grid::<f64>(1, 3).is_err());
}

#[test]
fn uniform_ring_term_is_m_squared() {
    let cfg = build_ground_state::<f64>(64, 2).unwrap();
    assert_eq!(cfg.plan.m_shells, 8);
    let base = potential_terms(&cfg).unwrap().polar;
    assert!((base - 64.0).abs() < 1e-10, "{base}");
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..20 {
        let mut p = cfg.clone();
        let j = rng.random_range(1..8);
        let step = PI / 8.0 * rng.random_range(-0.4..0.4);
        p.polar_angles[j][0] += step;
        assert!(potential_terms(&p).unwrap().polar > base);
    }
}

#[test]
fn three_dimensional_term_values() {
    let cfg = build_ground_state::<f64>(2744, 3).unwrap();
    let t = potential_terms(&cfg).unwrap();
    let sq: f64 = cfg.radii.iter().flatten().flatten().map(|r| r * r).sum();
    let k_total = cfg.plan.n_directions() as f64;
    let radial = t.radial + sq;
    assert!(((radial - 6.0 * (2744.0 - k_total)) / radial).abs() < 1e-10);
    let az: f64 = cfg
        .plan
        .k_per_shell
        .iter()
        .map(|&k| (k * k) as f64 / 4.0)
        .sum();
    assert!(((t.azimuthal - az) / az).abs() < 1e-12);
    assert!(((t.polar - 36.0) / 36.0).abs() < 1e-12);
}

#[test]
fn one_dimensional_rayleigh_hamiltonian() {
    for n in [10usize, 100] {
        let sol = solve_ground_state::<f64>(1, n, 1e-13).unwrap();
        let u = miw_core::config::radial_potential(&sol.points, 1).unwrap();
        let h = u + sol.points.iter().map(|x| x * x).sum::<f64>();
        assert!(((h - 4.0 * (n as f64 - 1.0)) / h).abs() < 1e-9);
    }
}

fn perturb_radius(cfg: &MiwConfiguration64, rng: &mut ChaCha8Rng) -> MiwConfiguration64 {
    let mut p = cfg.clone();
    let j = rng.random_range(0..p.radii.len());
    let k = rng.random_range(0..p.radii[j].len());
    let r = &mut p.radii[j][k];
    let i = rng.random_range(0..r.len());
    // Stay inside the neighbouring gaps so the order is preserved.
    let hi = if i == 0 { 0.5 } else { (r[i - 1] - r[i]) / 2.0 };
    let lo = if i + 1 == r.len() {
        0.5
    } else {
        (r[i] - r[i + 1]) / 2.0
    };
    let room = hi.min(lo) * rng.random_range(0.01..0.9);
    let step = if rng.random_bool(0.5) { room } else { -room };
    r[i] += step;
    if r[i] == 0.0 {
        r[i] += room / 2.0;
    }
    p
}

fn perturb_angle(cfg: &MiwConfiguration64, rng: &mut ChaCha8Rng) -> MiwConfiguration64 {
    let mut p = cfg.clone();
    let scale = rng.random_range(0.001..0.3);
    if p.d() == 2 || rng.random_bool(0.5) {
        let j = rng.random_range(0..p.polar_angles.len());
        let gap = PI / (2.0 * p.plan.m_shells as f64);
        let upper = if p.d() == 2 { PI } else { PI / 2.0 };
        let step = scale * gap * if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        for a in &mut p.polar_angles[j] {
            // Endpoint angles move inward; the law is flat outside its support.
            *a = if (0.0..upper).contains(&(*a + step)) {
                *a + step
            } else {
                *a - step
            };
        }
    } else {
        let j = rng.random_range(0..p.azimuths.len());
        let k = rng.random_range(0..p.azimuths[j].len());
        let gap = 2.0 * PI / p.azimuths[j].len() as f64;
        let a = &mut p.azimuths[j][k];
        *a =
            (*a + scale * gap * if rng.random_bool(0.5) { 1.0 } else { -1.0 }).rem_euclid(2.0 * PI);
        p.azimuths[j].sort_by(|a, b| a.partial_cmp(b).unwrap());
    }
    p
}

/// Move one point between two directions (possibly in different shells) and
/// rebuild with the ground-state angles and radii for the new counts.
fn reallocate(cfg: &MiwConfiguration64, rng: &mut ChaCha8Rng) -> MiwConfiguration64 {
    let mut plan: CountPlan = cfg.plan.clone();
    loop {
        let (js, ks) = pick(&plan, rng);
        let (jt, kt) = pick(&plan, rng);
        if (js, ks) == (jt, kt) || plan.n_per_direction[js][ks] <= 2 {
            continue;
        }
        plan.n_per_direction[js][ks] -= 1;
        plan.n_per_direction[jt][kt] += 1;
        break;
    }
    build_state(plan, cfg.spec.clone(), cfg.state_label.clone()).unwrap()
}

fn pick(plan: &CountPlan, rng: &mut ChaCha8Rng) -> (usize, usize) {
    let j = rng.random_range(0..plan.n_per_direction.len());
    (j, rng.random_range(0..plan.n_per_direction[j].len()))
}

#[test]
fn ground_states_are_local_minima() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x10ca1);
    for (n, d) in [(100usize, 2usize), (216, 3)] {
        let cfg = build_ground_state::<f64>(n, d).unwrap();
        let h0 = hamiltonian(&cfg).unwrap();
        for probe in 0..100 {
            let p = match probe % 3 {
                0 => perturb_radius(&cfg, &mut rng),
                1 => perturb_angle(&cfg, &mut rng),
                _ => reallocate(&cfg, &mut rng),
            };
            let h = hamiltonian(&p).unwrap();
            assert!(h > h0, "N={n} d={d} probe {probe}: {h} <= {h0}");
        }
    }
}

#[test]
fn builds_are_deterministic() {
    for (n, d) in [(484usize, 2usize), (512, 3), (4096, 4)] {
        let a = build_ground_state::<f64>(n, d).unwrap().to_json().unwrap();
        let b = build_ground_state::<f64>(n, d).unwrap().to_json().unwrap();
        assert_eq!(a.as_bytes(), b.as_bytes());
    }
}

#[test]
fn small_two_dimensional_build() {
    let cfg = build_ground_state::<f64>(4, 2).unwrap();
    assert_eq!(cfg.plan.m_shells, 2);
    assert_eq!(cfg.polar_angles, vec![vec![0.0], vec![PI / 2.0]]);
    for dir in &cfg.radii[0] {
        assert!((dir[0] - 1.0).abs() < 1e-12 && (dir[1] + 1.0).abs() < 1e-12);
    }
    assert_eq!(cfg.cartesian().len(), 4);
}

#[test]
fn ground_state_shapes() {
    let cfg = build_ground_state::<f64>(484, 2).unwrap();
    assert_eq!(cfg.radii[0].len(), 22);
    assert!(cfg.radii[0].iter().all(|r| r.len() == 22));
    assert_eq!(cfg.spec.radial_k, 1);
    let cfg = build_ground_state::<f64>(2744, 3).unwrap();
    assert_eq!(cfg.plan.uniform_shape(), Some((7, 28, 14)));
    assert_eq!(cfg.spec.radial_k, 2);
    for (k, &phi) in cfg.azimuths[3].iter().enumerate() {
        assert!((phi - 2.0 * PI * k as f64 / 28.0).abs() < 1e-14);
    }
    let pts = cfg.cartesian();
    assert_eq!(pts.len(), 2744);
    for (p, q) in cfg.points().iter().zip(&pts) {
        let norm = q.iter().map(|c| c * c).sum::<f64>().sqrt();
        assert!((norm - p.radius.abs()).abs() < 1e-12);
    }
}

#[test]
fn angular_marginals_approach_uniform() {
    let mut prev = f64::INFINITY;
    for n in [64usize, 216, 512, 1000, 2744] {
        let cfg = build_ground_state::<f64>(n, 3).unwrap();
        let az: Vec<f64> = cfg.points().iter().filter_map(|p| p.azimuth).collect();
        let w = w1_empirical_vs_uniform_angles(&az, 2.0 * PI).unwrap();
        assert!(w < prev, "N={n}: {w} >= {prev}");
        prev = w;
    }
}

#[test]
fn excited_presets() {
    let cfg = build_excited_state::<f64>(484, 2, &[1, 0]).unwrap();
    assert_eq!(cfg.plan.m_shells, 22);
    assert_eq!(cfg.spec.radial_k, 3);
    assert_eq!(cfg.spec.polar, AngularLaw::ExcitedPolar2);
    for (j, th) in cfg.polar_angles.iter().enumerate() {
        assert!((g2_cdf(th[0]) - j as f64 / 22.0).abs() < 1e-12);
    }
    let cfg = build_excited_state::<f64>(2744, 3, &[1, 0, 0]).unwrap();
    assert_eq!(cfg.plan.uniform_shape(), Some((7, 28, 14)));
    assert_eq!(cfg.spec.radial_k, 4);
    assert!(hamiltonian(&cfg).unwrap().is_finite());

    assert_eq!(g2_cdf(0.0_f64), 0.0);
    assert!((g2_cdf(PI) - 1.0).abs() < 1e-15);
    assert!((g3_raw(0.0_f64) + 1.0).abs() < 1e-15);
    assert!(g3_raw(PI / 2.0).abs() < 1e-15);

    assert!(matches!(
        build_excited_state::<f64>(100, 2, &[0, 1]),
        Err(MiwError::UnsupportedQuanta(_))
    ));
    let ground = build_excited_state::<f64>(100, 2, &[0, 0]).unwrap();
    assert_eq!(ground, build_ground_state::<f64>(100, 2).unwrap());
    let custom = StateSpec {
        radial_k: 3,
        polar: AngularLaw::UniformHalfTurn,
        azimuth: AngularLaw::UniformTurn,
    };
    assert!(miw_core::config::build_excited_state_with::<f64>(100, 2, &[0, 1], custom).is_ok());
}

#[test]
fn csv_listing() {
    let cfg = build_ground_state::<f64>(512, 3).unwrap();
    let csv = cfg.to_csv();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "shell_index,direction_index,point_index,polar_angles,azimuth,signed_radius,x1,x2,x3"
    );
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 512);
    let first: Vec<&str> = rows[0].split(',').collect();
    assert_eq!(&first[..3], &["1", "1", "1"]);
    assert_eq!(first.len(), 9);
}
