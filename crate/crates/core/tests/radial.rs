mod common;

use common::ols_slope;
use miw_core::radial::{
    big_b, kernel_matched_solve, recursion_step, signed_power, solve_ground_state, solve_symmetric,
    verify_properties, RadialSolution,
};
use miw_core::rates::{fit_rate, r_k, Correction};
use miw_core::stein::{kernel_mismatch, tau_discrete, wasserstein_bound, TiltedGaussianTarget};
use miw_core::wasser::w1_empirical_vs_cdf;
use miw_core::{MiwError, RadialSolution32, RadialSolution64};

fn solve(k: u32, n: usize) -> RadialSolution64 {
    solve_ground_state(k, n, 1e-12).unwrap()
}

#[test]
fn signed_power_and_b_examples() {
    assert_eq!(signed_power(-2.0_f64, 2), -4.0);
    assert_eq!(signed_power(0.0_f64, 5), 0.0);
    assert_eq!(signed_power(1.5_f64, 3), 3.375);
    assert_eq!(big_b(1.0_f64, 0), 1.0);
    assert_eq!(big_b(-1.0_f64, 1), -0.5);
    assert!((big_b(2.0_f64, 2) - 8.0 / 3.0).abs() < 1e-15);
}

#[test]
fn recursion_step_examples() {
    assert_eq!(recursion_step(&[1.0_f64], 0).unwrap(), 0.0);
    assert!((recursion_step(&[1.0_f64], 1).unwrap() + 1.0).abs() < 1e-15);
    let x1 = 1.5_f64.sqrt();
    assert!((recursion_step(&[x1], 2).unwrap() + x1).abs() < 1e-14);
}

#[test]
fn gaussian_two_point_solution() {
    let sol = solve(0, 2);
    let h = std::f64::consts::FRAC_1_SQRT_2;
    assert!((sol.points[0] - h).abs() < 1e-12 && (sol.points[1] + h).abs() < 1e-12);
    for k in 0..=14 {
        let sol = solve(k, 2);
        let sq: f64 = sol.points.iter().map(|x| x * x).sum();
        assert!((sq - (k as f64 + 1.0)).abs() < 1e-11);
    }
}

#[test]
fn rayleigh_solution_sits_under_its_bound() {
    let sol = solve(1, 22);
    assert_eq!(sol.points.len(), 22);
    let t = TiltedGaussianTarget::new(1).unwrap();
    let w = w1_empirical_vs_cdf(&sol.points, &t).unwrap();
    let b = wasserstein_bound(&sol, &t).unwrap();
    assert!(w <= b.total_bound, "{w} > {}", b.total_bound);
}

#[test]
#[allow(clippy::needless_range_loop)]
fn gaussian_gaps_are_reciprocal_partial_sums() {
    for n in [4usize, 30, 200] {
        let sol = solve(0, n);
        let sums = sol.partial_sums();
        for i in 0..n - 1 {
            let gap = sol.points[i] - sol.points[i + 1];
            assert!((gap * sums[i] - 1.0).abs() < 1e-9, "N={n} i={i}");
        }
        let tau = tau_discrete(&sol);
        assert!(tau[..n - 1].iter().all(|t| (t - 1.0).abs() < 1e-9));
        assert_eq!(tau[n - 1], 0.0);
    }
}

#[test]
fn verify_properties_examples() {
    let sol = solve(0, 4);
    let precise = solve_ground_state::<f64>(0, 4, 1e-14).unwrap();
    assert!(verify_properties(&sol).all_pass());
    for (a, b) in sol.points.iter().zip(&precise.points) {
        assert!((a - b).abs() < 1e-11);
    }

    let mut swapped = solve(2, 10).points;
    swapped.swap(0, 1);
    let rep = verify_properties(&RadialSolution::from_points(2, swapped));
    assert!(!rep.decreasing && !rep.all_pass());

    for k in 0..6u32 {
        let x = ((k as f64 + 1.0) / 2.0).sqrt();
        let rep = verify_properties(&RadialSolution::from_points(k, vec![x, -x]));
        assert!(rep.all_pass());
        assert!(rep.sum_defect == 0.0 && rep.symmetry_defect == 0.0);
    }
}

#[test]
fn rejects_bad_requests() {
    assert!(matches!(
        solve_ground_state::<f64>(1, 7, 1e-12),
        Err(MiwError::Domain(_))
    ));
    assert!(solve_ground_state::<f64>(1, 0, 1e-12).is_err());
    assert!(solve_ground_state::<f64>(1, 10, -1.0).is_err());
}

#[test]
fn x1_grows_like_sqrt_log_n() {
    for k in [0u32, 1, 2, 4] {
        let ratios: Vec<f64> = [10usize, 40, 160, 640, 2560]
            .iter()
            .map(|&n| solve(k, n).x1() / (n as f64).ln().sqrt())
            .collect();
        let c = ratios.iter().cloned().fold(0.0, f64::max);
        // A bounded ratio across a 256-fold range of N.
        assert!(c < 3.0, "k={k}: {ratios:?}");
        assert!(
            ratios.last().unwrap() / ratios[0] < 1.5,
            "k={k}: {ratios:?}"
        );
    }
}

#[test]
fn median_scaling_k2() {
    let ns: Vec<usize> = (14..=114).step_by(10).collect();
    let xs: Vec<f64> = ns.iter().map(|&n| (n as f64).ln()).collect();
    let ys: Vec<f64> = ns.iter().map(|&n| solve(2, n).x_median().ln()).collect();
    let r = -1.0 / ols_slope(&xs, &ys);
    assert!(((r - 3.1) / 3.1).abs() < 0.05, "r = {r}");
    let pairs: Vec<(usize, f64)> = ns.iter().map(|&n| (n, solve(2, n).x_median())).collect();
    let fit = fit_rate(&pairs, Correction::None).unwrap();
    assert!(((-1.0 / fit.exponent - r_k(2)) / r_k(2)).abs() < 0.05);
    assert!((-1.0 / fit.exponent - r).abs() < 1e-9);
}

#[test]
fn kernel_matched_reduces_to_ground_state_for_gaussian() {
    for n in [2usize, 10, 64] {
        let a = solve(0, n);
        let b = kernel_matched_solve::<f64>(0, n, 1e-12).unwrap();
        for (x, y) in a.points.iter().zip(&b.points) {
            assert!((x - y).abs() < 1e-10);
        }
    }
}

#[test]
fn kernel_matched_two_points_symmetric() {
    let sol = kernel_matched_solve::<f64>(1, 2, 1e-12).unwrap();
    assert!((sol.points[0] + sol.points[1]).abs() < 1e-12);
    assert!(sol.points.iter().sum::<f64>().abs() < 1e-12);
}

#[test]
fn kernel_matched_cancels_mismatch_on_upper_half() {
    // The matched recursion reproduces τ_∞ exactly on the shooting half; the
    // reflected half carries the index shift τ_∞(x_i) - τ_∞(x_{i+1}).
    for k in [1u32, 2, 3] {
        let n = 20;
        let sol = kernel_matched_solve::<f64>(k, n, 1e-12).unwrap();
        let d = kernel_mismatch(&sol).unwrap();
        assert!(d[..n / 2 - 1].iter().all(|&v| v < 1e-9), "k={k}: {d:?}");
        assert!(d[n / 2..].iter().any(|&v| v > 1e-3));
    }
}

#[test]
fn odd_counts_via_symmetric_solver() {
    for k in 0..=4u32 {
        for n in [3usize, 5, 11, 51] {
            let sol = solve_symmetric::<f64>(k, n, 1e-12).unwrap();
            assert_eq!(sol.points.len(), n);
            assert_eq!(sol.points[n / 2], 0.0);
            let rep = verify_properties(&sol);
            assert!(
                rep.zero_mean && rep.symmetric && rep.decreasing,
                "k={k} N={n}: {rep:?}"
            );
        }
        let even = solve_symmetric::<f64>(k, 12, 1e-12).unwrap();
        assert_eq!(even.points, solve(k, 12).points);
    }
}

#[test]
fn single_precision_solutions() {
    for k in 0..=4u32 {
        let s32: RadialSolution32 = solve_ground_state(k, 40, 1e-5).unwrap();
        let s64 = solve(k, 40);
        for (a, b) in s32.points.iter().zip(&s64.points) {
            assert!((*a as f64 - b).abs() < 1e-3, "k={k}: {a} vs {b}");
        }
        assert!(s32.points.windows(2).all(|w| w[0] > w[1]));
    }
}

#[test]
fn json_round_trip_is_bit_exact() {
    for k in [0u32, 3, 7] {
        let sol = solve(k, 50);
        let json = sol.to_json().unwrap();
        let back = RadialSolution64::from_json(&json).unwrap();
        assert_eq!(back.k, sol.k);
        assert_eq!(back.n_points, sol.n_points);
        for (a, b) in back.points.iter().zip(&sol.points) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        let v: serde_json::Value = serde_json::from_str(&json).unwrap();
        assert_eq!(v["k"], k);
        assert_eq!(v["N"], 50);
        assert_eq!(v["points"].as_array().unwrap().len(), 50);
    }
}

#[test]
fn csv_layout() {
    let sol = solve(1, 6);
    let csv = sol.to_csv();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "# k=1");
    assert_eq!(lines[1], "# N=6");
    assert_eq!(lines[2], "i,x");
    assert_eq!(lines.len(), 9);
    for (i, line) in lines[3..].iter().enumerate() {
        let (idx, x) = line.split_once(',').unwrap();
        assert_eq!(idx.parse::<usize>().unwrap(), i + 1);
        assert_eq!(x.parse::<f64>().unwrap().to_bits(), sol.points[i].to_bits());
    }
}

#[test]
fn repeated_solves_are_identical() {
    let a = solve(3, 300);
    let b = solve(3, 300);
    assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
}
