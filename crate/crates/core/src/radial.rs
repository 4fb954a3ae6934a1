//! One-dimensional ground-state recursion for the tilted Gaussian
//! `p(x) ∝ |x|^k φ(x)` and its symmetric, strictly decreasing solution.
//!
//! With `B(x) = sign(x)|x|^{k+1}/(k+1)` the recursion reads
//! `B(x_{n+1}) = B(x_n) - 1/Σ_{i≤n} sign(x_i)|x_i|^{1-k}`. The solver shoots on
//! `x_1` until the median residual `x_m + x_{m+1}` vanishes, then fills the
//! lower half by reflection.

use serde::{Deserialize, Serialize};

use crate::error::{MiwError, Result};
use crate::scalar::{pairwise_sum, signed_powi, Real};
use crate::stein;

/// Default bisection tolerance on the median residual.
pub const DEFAULT_TOL: f64 = 1e-12;
const MAX_SHOTS: usize = 200;

/// `|r|^d sign(r)`.
pub fn signed_power<T: Real>(r: T, d: u32) -> T {
    signed_powi(r, d as i32)
}

/// `B(x) = sign(x)|x|^{k+1}/(k+1)`.
pub fn big_b<T: Real>(x: T, k: u32) -> T {
    signed_power(x, k + 1) / T::count(k as usize + 1)
}

/// Inverse of [`big_b`].
pub fn big_b_inv<T: Real>(y: T, k: u32) -> T {
    let kp1 = T::count(k as usize + 1);
    let m = (kp1 * y.abs()).powf(T::one() / kp1);
    if y < T::zero() {
        -m
    } else {
        m
    }
}

/// `sign(x)|x|^{1-k}`, the summand of the recursion denominator.
#[inline]
fn weight<T: Real>(x: T, k: u32) -> T {
    x * x.abs().powi(-(k as i32))
}

/// Next point of the recursion given the prefix `x_1, ..., x_n`.
pub fn recursion_step<T: Real>(prefix: &[T], k: u32) -> Result<T> {
    let last = *prefix.last().ok_or(MiwError::EmptyInput)?;
    if k >= 1 {
        if let Some(i) = prefix.iter().position(|&x| x == T::zero()) {
            return Err(MiwError::ZeroPoint { index: i + 1 });
        }
    }
    let terms: Vec<T> = prefix.iter().map(|&x| weight(x, k)).collect();
    let s = pairwise_sum(&terms);
    if s == T::zero() || !s.is_finite() {
        return Err(MiwError::SingularSum {
            index: prefix.len(),
        });
    }
    Ok(big_b_inv(big_b(last, k) - s.recip(), k))
}

/// Symmetric strictly decreasing solution of the recursion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct RadialSolution<T> {
    pub k: u32,
    #[serde(rename = "N")]
    pub n_points: usize,
    pub points: Vec<T>,
    #[serde(default)]
    pub median_index: usize,
    /// Achieved median defect `|x_m + x_{m+1}|` before reflection.
    #[serde(default)]
    pub residual: T,
    /// Shots taken by the bisection.
    #[serde(default, skip_serializing)]
    pub shots: usize,
    /// Midpoint residuals that fell outside the current bracket values.
    #[serde(default, skip_serializing)]
    pub monotonicity_violations: usize,
}

impl<T: Real> RadialSolution<T> {
    /// Wrap an arbitrary point sequence without checking any invariant.
    pub fn from_points(k: u32, points: Vec<T>) -> Self {
        let n = points.len();
        let m = n / 2;
        let residual = if n % 2 == 1 {
            points[m].abs()
        } else if n >= 2 {
            (points[m - 1] + points[m]).abs()
        } else {
            T::zero()
        };
        Self {
            k,
            n_points: n,
            points,
            median_index: m,
            residual,
            shots: 0,
            monotonicity_violations: 0,
        }
    }

    /// `x_1`, the largest point.
    pub fn x1(&self) -> T {
        self.points[0]
    }

    /// `x_m`, the smallest positive point.
    pub fn x_median(&self) -> T {
        self.points[self.median_index - 1]
    }

    /// Points in ascending order.
    pub fn ascending(&self) -> Vec<T> {
        self.points.iter().rev().copied().collect()
    }

    /// Partial sums `σ_i = Σ_{j≤i} x_j`.
    pub fn partial_sums(&self) -> Vec<T> {
        let mut acc = T::zero();
        self.points
            .iter()
            .map(|&x| {
                acc = acc + x;
                acc
            })
            .collect()
    }

    /// `# k=…` and `# N=…` comment lines, then `i,x` rows with 1-based `i`.
    pub fn to_csv(&self) -> String {
        let mut s = format!("# k={}\n# N={}\ni,x\n", self.k, self.n_points);
        for (i, &x) in self.points.iter().enumerate() {
            s.push_str(&format!("{},{}\n", i + 1, crate::config::fmt_real(x)));
        }
        s
    }

    /// `{k, N, points, median_index, residual}`; decimals round-trip exactly.
    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| MiwError::Domain(e.to_string()))
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| MiwError::Domain(e.to_string()))
    }
}

/// Which recursion the shooting drives.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Scheme {
    Ground,
    KernelMatched,
}

enum Shot<T> {
    /// Some `x_j`, `j ≤ m`, reached zero or the iterate misbehaved.
    TooSmall,
    Residual {
        value: T,
        upper: Vec<T>,
    },
}

fn shoot<T: Real>(x1: T, k: u32, m: usize, odd: bool, scheme: Scheme) -> Shot<T> {
    let mut upper = Vec::with_capacity(m + 1);
    upper.push(x1);
    let mut s = T::zero();
    let mut x = x1;
    for step in 1..=m {
        let next = match scheme {
            Scheme::Ground => {
                s = s + weight(x, k);
                big_b_inv(big_b(x, k) - s.recip(), k)
            }
            Scheme::KernelMatched => {
                s = s + x;
                match stein::tau_infinity(k, x) {
                    Ok(tau) => x - tau / s,
                    Err(_) => return Shot::TooSmall,
                }
            }
        };
        if !next.is_finite() {
            return Shot::TooSmall;
        }
        if step < m && next <= T::zero() {
            return Shot::TooSmall;
        }
        upper.push(next);
        x = next;
    }
    // Even N: zero median `x_m + x_{m+1} = 0`. Odd N: middle point `x_{m+1} = 0`.
    let value = if odd {
        upper[m]
    } else {
        upper[m - 1] + upper[m]
    };
    Shot::Residual { value, upper }
}

/// Initial shooting bracket `[√((k+1)/2), 3√((k+1) ln N) + 3]`.
pub fn initial_bracket<T: Real>(k: u32, n_points: usize) -> (T, T) {
    let kp1 = T::count(k as usize + 1);
    let lo = (kp1 / T::lit(2.0)).sqrt();
    let hi = T::lit(3.0) * (kp1 * T::count(n_points).ln()).sqrt() + T::lit(3.0);
    (lo, hi)
}

fn check_request(n_points: usize, tol: f64, allow_odd: bool) -> Result<()> {
    if n_points < 2 || (!allow_odd && !n_points.is_multiple_of(2)) {
        return Err(MiwError::Domain(format!(
            "number of points must be even and at least 2, got {n_points}"
        )));
    }
    if !(tol > 0.0) {
        return Err(MiwError::Domain(format!(
            "tolerance must be positive, got {tol}"
        )));
    }
    Ok(())
}

fn solve<T: Real>(
    k: u32,
    n_points: usize,
    tol: f64,
    scheme: Scheme,
    allow_odd: bool,
) -> Result<RadialSolution<T>> {
    check_request(n_points, tol, allow_odd)?;
    let m = n_points / 2;
    let odd = n_points % 2 == 1;
    let tol_t = T::tol_floor(tol);
    let (mut lo, mut hi) = initial_bracket::<T>(k, n_points);
    let residual_of = |shot: &Shot<T>| match shot {
        Shot::TooSmall => T::neg_infinity(),
        Shot::Residual { value, .. } => *value,
    };

    let shot_lo = shoot(lo, k, m, odd, scheme);
    let mut g_lo = residual_of(&shot_lo);
    let mut shots = 1;
    if let Shot::Residual { value, upper } = &shot_lo {
        if value.abs() <= tol_t {
            return Ok(assemble(k, n_points, upper, *value, shots, 0));
        }
    }
    // τ_∞ diverges at the origin, so a matched root can sit below the ground-state
    // bracket; walk the lower end down until the shot undershoots.
    let mut expansions = 0;
    while g_lo > T::zero() && expansions < 60 {
        hi = lo;
        lo = lo * T::lit(0.5);
        let shot = shoot(lo, k, m, odd, scheme);
        shots += 1;
        expansions += 1;
        g_lo = residual_of(&shot);
        if let Shot::Residual { value, upper } = &shot {
            if value.abs() <= tol_t {
                return Ok(assemble(k, n_points, upper, *value, shots, 0));
            }
        }
    }
    let shot_hi = shoot(hi, k, m, odd, scheme);
    let mut g_hi = residual_of(&shot_hi);
    shots += 1;
    if !(g_lo < T::zero() && g_hi > T::zero()) {
        return Err(MiwError::NonBracketing {
            lo: lo.as_f64(),
            hi: hi.as_f64(),
        });
    }
    let mut best: Option<(T, Vec<T>)> = None;
    let mut violations = 0;
    let half = T::lit(0.5);
    for _ in 0..MAX_SHOTS {
        let mid = lo + (hi - lo) * half;
        if mid <= lo || mid >= hi {
            // Bracket exhausted at working precision: keep the closest shot.
            break;
        }
        let shot = shoot(mid, k, m, odd, scheme);
        shots += 1;
        let g = residual_of(&shot);
        if g.is_finite() && (g < g_lo || g > g_hi) {
            violations += 1;
        }
        if let Shot::Residual { value, upper } = shot {
            let closer = best.as_ref().is_none_or(|(b, _)| value.abs() < b.abs());
            if closer {
                best = Some((value, upper));
            }
            if value.abs() <= tol_t {
                break;
            }
        }
        if g < T::zero() {
            lo = mid;
            g_lo = g;
        } else {
            hi = mid;
            g_hi = g;
        }
    }
    if let Shot::Residual { value, upper } = shot_hi {
        let closer = best.as_ref().is_none_or(|(b, _)| value.abs() < b.abs());
        if closer {
            best = Some((value, upper));
        }
    }
    match best {
        Some((value, upper)) => Ok(assemble(k, n_points, &upper, value, shots, violations)),
        None => Err(MiwError::IterationLimit {
            context: "zero-median shooting",
            limit: MAX_SHOTS,
        }),
    }
}

fn assemble<T: Real>(
    k: u32,
    n_points: usize,
    upper: &[T],
    residual: T,
    shots: usize,
    violations: usize,
) -> RadialSolution<T> {
    let m = n_points / 2;
    let mut points = Vec::with_capacity(n_points);
    points.extend_from_slice(&upper[..m]);
    if n_points % 2 == 1 {
        points.push(T::zero());
    }
    for i in (0..m).rev() {
        points.push(-upper[i]);
    }
    RadialSolution {
        k,
        n_points,
        points,
        median_index: m,
        residual: residual.abs(),
        shots,
        monotonicity_violations: violations,
    }
}

/// Unique zero-median solution of the ground-state recursion.
pub fn solve_ground_state<T: Real>(k: u32, n_points: usize, tol: f64) -> Result<RadialSolution<T>> {
    solve(k, n_points, tol, Scheme::Ground, false)
}

/// Symmetric solution of the ground-state recursion for any `N ≥ 2`.
///
/// For even `N` this is [`solve_ground_state`]. For odd `N = 2m + 1` the
/// middle point is pinned at the origin, where the recursion weight
/// `sign(0)|0|^{1-k}` is taken as zero; the shot is on `x_{m+1} = 0`.
/// Configurations need this because count allocation can leave odd
/// per-direction totals.
pub fn solve_symmetric<T: Real>(k: u32, n_points: usize, tol: f64) -> Result<RadialSolution<T>> {
    solve(k, n_points, tol, Scheme::Ground, true)
}

/// Zero-median solution of `x_{i+1} = x_i - τ_∞(x_i)/Σ_{j≤i} x_j`.
///
/// The upper half matches the continuum Stein kernel exactly; the lower half
/// is the reflection of the upper half.
pub fn kernel_matched_solve<T: Real>(
    k: u32,
    n_points: usize,
    tol: f64,
) -> Result<RadialSolution<T>> {
    solve(k, n_points, tol, Scheme::KernelMatched, false)
}

/// Tolerances used by [`verify_properties_with`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PropertyTolerances {
    /// `|Σ x_i| ≤ zero_sum · N`.
    pub zero_sum: f64,
    /// Relative defect of `Σ x_i² = (k+1)(N-1)`.
    pub variance: f64,
    /// `max |x_i + x_{N+1-i}|`.
    pub symmetry: f64,
}

impl Default for PropertyTolerances {
    fn default() -> Self {
        Self {
            zero_sum: 1e-9,
            variance: 1e-8,
            symmetry: 1e-9,
        }
    }
}

/// Defects of the four structural properties.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PropertyReport {
    pub sum_defect: f64,
    pub variance_defect: f64,
    pub symmetry_defect: f64,
    /// Smallest consecutive gap `x_i - x_{i+1}` (positive iff strictly decreasing).
    pub min_gap: f64,
    pub zero_mean: bool,
    pub variance: bool,
    pub symmetric: bool,
    pub decreasing: bool,
}

impl PropertyReport {
    pub fn all_pass(&self) -> bool {
        self.zero_mean && self.variance && self.symmetric && self.decreasing
    }
}

pub fn verify_properties<T: Real>(sol: &RadialSolution<T>) -> PropertyReport {
    verify_properties_with(sol, &PropertyTolerances::default())
}

pub fn verify_properties_with<T: Real>(
    sol: &RadialSolution<T>,
    tol: &PropertyTolerances,
) -> PropertyReport {
    let n = sol.points.len();
    let sum = pairwise_sum(&sol.points).as_f64().abs();
    let squares: Vec<T> = sol.points.iter().map(|&x| x * x).collect();
    let target = ((sol.k as f64) + 1.0) * (n as f64 - 1.0);
    let variance_defect = if target > 0.0 {
        ((pairwise_sum(&squares).as_f64() - target) / target).abs()
    } else {
        pairwise_sum(&squares).as_f64().abs()
    };
    let symmetry_defect = (0..n)
        .map(|i| (sol.points[i] + sol.points[n - 1 - i]).as_f64().abs())
        .fold(0.0, f64::max);
    let min_gap = sol
        .points
        .windows(2)
        .map(|w| (w[0] - w[1]).as_f64())
        .fold(f64::INFINITY, f64::min);
    PropertyReport {
        sum_defect: sum,
        variance_defect,
        symmetry_defect,
        min_gap,
        zero_mean: sum <= tol.zero_sum * n as f64,
        variance: variance_defect <= tol.variance,
        symmetric: symmetry_defect <= tol.symmetry,
        decreasing: min_gap > 0.0,
    }
}
