mod common;

use common::{gamma_half, simpson, tau_oracle, tilted_unnormalised, TabulatedCdf};
use miw_core::radial::solve_ground_state;
use miw_core::stein::{
    relaxed_bound, tau_discrete, tau_infinity, tau_infinity_incgamma, wasserstein_bound,
    TiltedGaussianTarget,
};
use miw_core::wasser::w1_empirical_vs_cdf;
use miw_core::{BoundReport64, MiwError, RadialSolution64, TiltedGaussianTarget64};

fn target(k: u32) -> TiltedGaussianTarget64 {
    TiltedGaussianTarget::new(k).unwrap()
}

fn solve(k: u32, n: usize) -> RadialSolution64 {
    solve_ground_state(k, n, 1e-12).unwrap()
}

/// `Z_k = ∫ |x|^k e^{-x²/2} dx = 2^{(k+1)/2} Γ((k+1)/2)`.
fn z(k: u32) -> f64 {
    2f64.powf((k as f64 + 1.0) / 2.0) * gamma_half(k + 1)
}

#[test]
fn density_matches_normalised_weight() {
    for k in 0..=10u32 {
        let t = target(k);
        for x in [-3.1, -0.4, 0.2, 1.0, 2.7, 6.0] {
            let oracle = tilted_unnormalised(k, x) / z(k);
            assert!(
                ((t.density(x) - oracle) / oracle).abs() < 1e-13,
                "k={k} x={x}"
            );
        }
        let mass = simpson(|x| t.density(x), -14.0, 14.0, 40_000);
        assert!((mass - 1.0).abs() < 1e-12, "k={k}: mass {mass}");
        let second = simpson(|x| x * x * t.density(x), -14.0, 14.0, 40_000);
        assert!((second - (k as f64 + 1.0)).abs() < 1e-10, "k={k}: {second}");
    }
}

#[test]
fn cdf_against_tabulated_quadrature() {
    for k in [0u32, 1, 2, 5] {
        let t = target(k);
        let tab = TabulatedCdf::tilted(k);
        for i in 0..=60 {
            let x = -6.0 + 0.2 * i as f64;
            let got = t.cdf(x).unwrap();
            assert!((got - tab.cdf(x)).abs() < 1e-8, "k={k} x={x}");
            assert!((got + t.survival(x).unwrap() - 1.0).abs() < 1e-14);
        }
        assert_eq!(t.cdf(0.0).unwrap(), 0.5);
    }
}

#[test]
fn mean_abs_by_quadrature() {
    for k in 0..=6u32 {
        let t = target(k);
        let oracle = simpson(|x| x * t.density(x), 0.0, 14.0, 40_000) * 2.0;
        assert!((t.mean_abs().unwrap() - oracle).abs() < 1e-12, "k={k}");
    }
}

#[test]
fn stein_kernel_examples() {
    assert_eq!(tau_infinity(0, 3.7_f64).unwrap(), 1.0);
    assert!((tau_infinity(4, 2.0_f64).unwrap() - 2.5).abs() < 1e-13);
    assert!((tau_infinity(2, 1.0_f64).unwrap() - 3.0).abs() < 1e-14);
    assert!(matches!(tau_infinity(3, 0.0_f64), Err(MiwError::Domain(_))));
    for k in 0..=12u32 {
        for x in [0.05, 0.3, 1.0, 2.2, 4.0, 7.5] {
            let oracle = tau_oracle(k, x);
            let got = tau_infinity(k, x).unwrap();
            assert!(
                ((got - oracle) / oracle).abs() < 1e-10,
                "k={k} x={x}: {got} vs {oracle}"
            );
            let alt = tau_infinity_incgamma(k, x).unwrap();
            assert!(((got - alt) / alt).abs() < 1e-12, "k={k} x={x}");
        }
    }
}

#[test]
fn stein_kernel_shape() {
    for k in 1..=10u32 {
        let mut prev = f64::INFINITY;
        for i in 1..=400 {
            let x = 0.03 * i as f64;
            let t = tau_infinity(k, x).unwrap();
            assert_eq!(t, tau_infinity(k, -x).unwrap());
            assert!(t < prev, "k={k}: not decreasing at {x}");
            assert!((2.0 / t - 1.0).abs() <= 1.0);
            prev = t;
        }
        // Blows up like √(π/2)/x for k = 1 and like k/x² beyond.
        assert!(tau_infinity(k, 1e-6).unwrap() > 1e6);
        assert!((tau_infinity(k, 12.0).unwrap() - 1.0) < (k as f64 + 2.0) / 144.0);
    }
}

#[test]
fn r_at_origin_and_oracle() {
    let t = target(0);
    let r0 = t.r_infinity(0.0).unwrap();
    assert!((r0 - 1.0 / (2.0 * std::f64::consts::PI).sqrt()).abs() < 1e-15);
    // R_∞(x) = (1/p(x)) ∫_{-∞}^x P ∫_x^∞ (1 - P), with P tabulated by quadrature.
    for k in [0u32, 1, 3] {
        let t = target(k);
        let tab = TabulatedCdf::tilted(k);
        for x in [0.4, 1.1, 2.5] {
            let left = simpson(|u| tab.cdf(u), -13.0, x, 20_000);
            let right = simpson(|u| 1.0 - tab.cdf(u), x, 13.0, 20_000);
            let oracle = left * right / t.density(x);
            let got = t.r_infinity(x).unwrap();
            assert!(
                ((got - oracle) / oracle).abs() < 1e-6,
                "k={k} x={x}: {got} vs {oracle}"
            );
        }
    }
}

#[test]
fn r_is_even_and_capped_by_kernel() {
    for k in 0..=8u32 {
        let t = target(k);
        let cap = t.r_over_tau(0.0).unwrap();
        assert!((cap - t.mean_abs().unwrap() / 2.0).abs() < 1e-15);
        for i in 1..=120 {
            let x = 0.05 * i as f64;
            assert_eq!(t.r_infinity(x).unwrap(), t.r_infinity(-x).unwrap());
            assert!(t.r_over_tau(x).unwrap() <= cap + 1e-12, "k={k} x={x}");
        }
    }
    assert!(target(2).r_infinity(0.0).is_err());
}

#[test]
fn psi_bounds_and_limits() {
    for k in 0..=8u32 {
        let t = target(k);
        for i in 0..=400 {
            let x = 0.025 * i as f64;
            let p1 = t.psi1(x).unwrap();
            let p2 = t.psi2(x).unwrap();
            assert!((0.0..=1.0).contains(&p1), "k={k} x={x}: Ψ1 = {p1}");
            assert!((0.0..=2.0).contains(&p2), "k={k} x={x}: Ψ2 = {p2}");
        }
        // Ψ2 approaches 2 in the far tail.
        let far = t.psi2(40.0).unwrap();
        assert!((far - 2.0).abs() < 0.05, "k={k}: Ψ2(40) = {far}");
    }
    assert!((target(0).psi1(0.0).unwrap() - (2.0 / std::f64::consts::PI).sqrt()).abs() < 1e-15);
    assert!((target(0).psi1(1e-4).unwrap() - (2.0 / std::f64::consts::PI).sqrt()).abs() < 1e-6);
    assert!(target(3).psi1(1e-4).unwrap() < 1e-6);
}

#[test]
fn psi1_decreases_past_its_mode() {
    // For k = 2 the maximum sits near x ≈ 1.98; Ψ1(3) exceeds Ψ1(1.2).
    let t = target(2);
    let grid: Vec<f64> = (0..=600).map(|i| 0.01 * i as f64).collect();
    let vals: Vec<f64> = grid.iter().map(|&x| t.psi1(x).unwrap()).collect();
    let mode = vals
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
        .unwrap()
        .0;
    assert!((grid[mode] - 1.98).abs() < 0.05, "mode at {}", grid[mode]);
    assert!(vals[mode..].windows(2).all(|w| w[1] <= w[0]));
    assert!(vals[..=mode].windows(2).all(|w| w[1] >= w[0]));
    assert!(t.psi1(3.0).unwrap() > t.psi1(1.2).unwrap());
}

#[test]
fn discrete_kernel_is_symmetric() {
    for k in 0..=5u32 {
        let sol = solve(k, 40);
        let tau = tau_discrete(&sol);
        let n = tau.len();
        assert_eq!(tau[n - 1], 0.0);
        assert!(tau[..n - 1].iter().all(|&t| t > 0.0));
        for i in 0..n - 1 {
            let j = n - 2 - i;
            assert!(
                (tau[i] - tau[j]).abs() < 1e-9 * tau[i].max(1.0),
                "k={k} i={i}"
            );
        }
    }
}

#[test]
fn gaussian_bound_below_simple_envelope() {
    for n in [2usize, 10, 50, 200, 1000] {
        let sol = solve(0, n);
        let b = wasserstein_bound(&sol, &target(0)).unwrap();
        let envelope = (1.0 + 4.0 * sol.x1()) / n as f64;
        assert!(
            b.total_bound <= envelope,
            "N={n}: {} > {envelope}",
            b.total_bound
        );
    }
}

#[test]
fn relaxed_bound_dominates_sharp_bound() {
    for k in 0..=6u32 {
        for n in [4usize, 30, 120] {
            let sol = solve(k, n);
            let t = target(k);
            let sharp = wasserstein_bound(&sol, &t).unwrap().total_bound;
            let relaxed = relaxed_bound(&sol, &t).unwrap();
            assert!(relaxed >= sharp, "k={k} N={n}");
        }
    }
}

#[test]
fn rayleigh_bound_scales_like_log_over_n() {
    let t = target(1);
    let ratios: Vec<f64> = [20usize, 80, 320, 1280]
        .iter()
        .map(|&n| {
            let b = wasserstein_bound(&solve(1, n), &t).unwrap().total_bound;
            b * n as f64 / (n as f64).ln()
        })
        .collect();
    let (lo, hi) = ratios
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(a, b), &r| (a.min(r), b.max(r)));
    assert!(hi / lo < 2.0, "{ratios:?}");
}

#[test]
fn bound_dominates_exact_distance() {
    for k in 0..=8u32 {
        let t = target(k);
        for n in [2usize, 6, 20, 64, 200, 500] {
            let sol = solve(k, n);
            let mut b = wasserstein_bound(&sol, &t).unwrap();
            b.exact_w1 = Some(w1_empirical_vs_cdf(&sol.points, &t).unwrap());
            assert_eq!(b.dominance(), Some(true), "k={k} N={n}: {b:?}");
        }
    }
}

#[test]
fn mismatched_k_is_rejected() {
    let sol = solve(2, 10);
    assert!(matches!(
        wasserstein_bound(&sol, &target(3)),
        Err(MiwError::MismatchedK { .. })
    ));
}

#[test]
fn report_serialisation() {
    let sol = solve(2, 30);
    let b: BoundReport64 = wasserstein_bound(&sol, &target(2)).unwrap();
    assert!((b.total_bound - b.term_kernel_mismatch - b.term_gap).abs() < 1e-15);
    let row = b.to_csv_row();
    let cols: Vec<&str> = row.split(',').collect();
    assert_eq!(cols.len(), BoundReport64::CSV_HEADER.split(',').count());
    assert_eq!(cols[0], "2");
    assert_eq!(cols[1], "30");
    assert_eq!(cols[4].parse::<f64>().unwrap(), b.total_bound);
    assert!(cols[5..].iter().all(|c| c.is_empty()));
    assert_eq!(b.dominance(), None);
    let v: serde_json::Value = serde_json::from_str(&b.to_json().unwrap()).unwrap();
    assert_eq!(v["N"], 30);
    assert!(v["exact_w1"].is_null());
}
