//! Tilted Gaussian target `p(x) = c_k |x|^k φ(x)`, its Stein kernel, the
//! bound functions Ψ1, Ψ2, R, the discrete kernel τ_N and the discrete-density
//! Wasserstein bound.
//!
//! Closed forms use `u = x²/2` and the scaled incomplete gamma
//! `S(a, u) = e^u u^{-a} Γ(a, u)`:
//! `τ(x) = u·S(1 + k/2, u)` and `Q(x)/p(x) = x·S((k+1)/2, u)/2` for `x > 0`.

use serde::{Deserialize, Serialize};

use crate::error::{MiwError, Result};
use crate::radial::RadialSolution;
use crate::scalar::{pairwise_sum, Real};
use crate::specfn::{self, QuadratureSpec};

/// Law with density `c_k |x|^k e^{-x²/2}/√(2π)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct TiltedGaussianTarget<T> {
    pub k: u32,
    pub normalizer: T,
    pub quadrature: QuadratureSpec,
}

/// `c_k = √π / (2^{k/2} Γ((k+1)/2))`.
pub fn normalizer<T: Real>(k: u32) -> Result<T> {
    let kf = T::count(k as usize);
    let two = T::lit(2.0);
    let g = specfn::gamma((kf + T::one()) / two)?;
    Ok(T::PI().sqrt() / (two.powf(kf / two) * g))
}

fn half_k_shift<T: Real>(k: u32) -> (T, T) {
    let kf = T::count(k as usize);
    let two = T::lit(2.0);
    (T::one() + kf / two, (kf + T::one()) / two)
}

/// Stein kernel `τ_∞(x; k)` with closed-form fast paths for `k ≤ 2`.
pub fn tau_infinity<T: Real>(k: u32, x: T) -> Result<T> {
    let ax = x.abs();
    match k {
        0 => Ok(T::one()),
        _ if ax == T::zero() => Err(MiwError::Domain(format!(
            "Stein kernel for k = {k} diverges at x = 0"
        ))),
        1 => {
            let r = T::lit(std::f64::consts::FRAC_PI_2).sqrt();
            Ok(T::one() + r * specfn::erfcx(ax / T::SQRT_2()) / ax)
        }
        2 => Ok(T::one() + T::lit(2.0) / (x * x)),
        _ => tau_infinity_incgamma(k, x),
    }
}

/// Stein kernel through the scaled incomplete gamma, for every `k`.
pub fn tau_infinity_incgamma<T: Real>(k: u32, x: T) -> Result<T> {
    let ax = x.abs();
    if ax == T::zero() {
        if k == 0 {
            return Ok(T::one());
        }
        return Err(MiwError::Domain(format!(
            "Stein kernel for k = {k} diverges at x = 0"
        )));
    }
    let u = ax * ax / T::lit(2.0);
    let (a, _) = half_k_shift::<T>(k);
    Ok(u * specfn::scaled_upper_gamma(a, u)?)
}

impl<T: Real> TiltedGaussianTarget<T> {
    pub fn new(k: u32) -> Result<Self> {
        Self::with_quadrature(k, QuadratureSpec::default())
    }

    pub fn with_quadrature(k: u32, quadrature: QuadratureSpec) -> Result<Self> {
        quadrature.validate()?;
        Ok(Self {
            k,
            normalizer: normalizer(k)?,
            quadrature,
        })
    }

    fn inv_sqrt_2pi() -> T {
        T::one() / (T::lit(2.0) * T::PI()).sqrt()
    }

    pub fn density(&self, x: T) -> T {
        let ax = x.abs();
        self.normalizer
            * ax.powi(self.k as i32)
            * (-(x * x) / T::lit(2.0)).exp()
            * Self::inv_sqrt_2pi()
    }

    /// Regularized upper gamma `Q((k+1)/2, x²/2)`, i.e. `P(|X| > |x|)`.
    fn two_sided_tail(&self, x: T) -> Result<T> {
        let (_, b) = half_k_shift::<T>(self.k);
        specfn::gamma_q(b, x * x / T::lit(2.0))
    }

    pub fn cdf(&self, x: T) -> Result<T> {
        let q = self.two_sided_tail(x)? / T::lit(2.0);
        Ok(if x >= T::zero() { T::one() - q } else { q })
    }

    /// `1 - cdf(x)` without cancellation in the right tail.
    pub fn survival(&self, x: T) -> Result<T> {
        let q = self.two_sided_tail(x)? / T::lit(2.0);
        Ok(if x >= T::zero() { q } else { T::one() - q })
    }

    /// Partial first moment `∫_{|x|}^∞ u p(u) du = c_k 2^{k/2} Γ(1+k/2, x²/2)/√(2π)`.
    pub fn partial_moment(&self, x: T) -> Result<T> {
        let (a, _) = half_k_shift::<T>(self.k);
        let two = T::lit(2.0);
        let u = x * x / two;
        let g = specfn::gamma_q(a, u)? * specfn::gamma(a)?;
        Ok(self.normalizer * two.powf(T::count(self.k as usize) / two) * g * Self::inv_sqrt_2pi())
    }

    /// `∫_{-∞}^x P(u) du = x P(x) + ∫_{|x|}^∞ u p(u) du`.
    pub fn cdf_integral(&self, x: T) -> Result<T> {
        Ok(x * self.cdf(x)? + self.partial_moment(x)?)
    }

    /// `∫_x^∞ (1 - P(u)) du = ∫_{|x|}^∞ u p(u) du - x (1 - P(x))`.
    pub fn survival_integral(&self, x: T) -> Result<T> {
        Ok(self.partial_moment(x)? - x * self.survival(x)?)
    }

    /// `E|X| = 2 ∫_0^∞ u p(u) du`.
    pub fn mean_abs(&self) -> Result<T> {
        Ok(T::lit(2.0) * self.partial_moment(T::zero())?)
    }

    pub fn stein_kernel(&self, x: T) -> Result<T> {
        tau_infinity(self.k, x)
    }

    /// `(1/p(x)) ∫_{|x|}^∞ (1 - P(u)) du` for `x ≠ 0`, computed without
    /// forming the density.
    fn tail_integral_over_density(&self, x: T) -> Result<T> {
        let ax = x.abs();
        let u = ax * ax / T::lit(2.0);
        let (a, b) = half_k_shift::<T>(self.k);
        Ok(u * (specfn::scaled_upper_gamma(a, u)? - specfn::scaled_upper_gamma(b, u)?))
    }

    /// `R_∞(x) = (1/p(x)) ∫_{-∞}^x P · ∫_x^∞ (1 - P)`; even in `x`.
    pub fn r_infinity(&self, x: T) -> Result<T> {
        let ax = x.abs();
        if ax == T::zero() {
            if self.k == 0 {
                return Ok(Self::inv_sqrt_2pi());
            }
            return Err(MiwError::Domain(format!(
                "R is infinite at x = 0 for k = {}",
                self.k
            )));
        }
        Ok(self.cdf_integral(ax)? * self.tail_integral_over_density(ax)?)
    }

    /// `R_∞(x)/τ_∞(x)`; finite at 0 with value `∫_0^∞ u p(u) du`.
    pub fn r_over_tau(&self, x: T) -> Result<T> {
        let ax = x.abs();
        if ax == T::zero() {
            return self.partial_moment(T::zero());
        }
        Ok(self.r_infinity(ax)? / tau_infinity(self.k, ax)?)
    }

    /// `Ψ1(x) = 2R_∞(x)/τ_∞(x)²`, with its limit at 0.
    pub fn psi1(&self, x: T) -> Result<T> {
        if x == T::zero() {
            return Ok(if self.k == 0 {
                (T::lit(2.0) / T::PI()).sqrt()
            } else {
                T::zero()
            });
        }
        let tau = tau_infinity(self.k, x)?;
        Ok(T::lit(2.0) * self.r_infinity(x)? / (tau * tau))
    }

    /// `Ψ2(x) = (1/τ)(1 + |2x/τ - x + k/x| R/τ)`, with its limit at 0.
    pub fn psi2(&self, x: T) -> Result<T> {
        if x == T::zero() {
            return Ok(match self.k {
                0 => T::one(),
                1 => T::lit(0.5),
                _ => T::zero(),
            });
        }
        let tau = tau_infinity(self.k, x)?;
        let drift = T::lit(2.0) * x / tau - x + T::count(self.k as usize) / x;
        Ok((T::one() + drift.abs() * self.r_infinity(x)? / tau) / tau)
    }
}

/// `τ_N(x_i) = (x_i - x_{i+1}) Σ_{j≤i} x_j` for `i < N` and `τ_N(x_N) = 0`.
pub fn tau_discrete<T: Real>(sol: &RadialSolution<T>) -> Vec<T> {
    let sums = sol.partial_sums();
    let n = sol.points.len();
    (0..n)
        .map(|i| {
            if i + 1 < n {
                (sol.points[i] - sol.points[i + 1]) * sums[i]
            } else {
                T::zero()
            }
        })
        .collect()
}

/// Discrete-density bound on the Wasserstein distance for one `(k, N)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct BoundReport<T> {
    pub k: u32,
    #[serde(rename = "N")]
    pub n_points: usize,
    /// `(1/N) Σ |τ_∞ - τ_N| Ψ1`.
    pub term_kernel_mismatch: T,
    /// `(1/N) Σ |x_i - x_{i+1}| τ_N max(Ψ2(x_i), Ψ2(x_{i+1}))`.
    pub term_gap: T,
    pub total_bound: T,
    pub exact_w1: Option<T>,
    pub coupling_bound: Option<T>,
    pub inverse_moment_l1: Option<T>,
}

impl<T: Real> BoundReport<T> {
    /// `exact_w1 ≤ total_bound`, when the distance is present.
    pub fn dominance(&self) -> Option<bool> {
        self.exact_w1.map(|w| w <= self.total_bound)
    }

    pub const CSV_HEADER: &'static str =
        "k,N,term_kernel_mismatch,term_gap,total,exact_w1,coupling_bound,inverse_moment_l1";

    /// One row matching [`Self::CSV_HEADER`]; absent optional values are empty fields.
    pub fn to_csv_row(&self) -> String {
        let f = |x: T| crate::config::fmt_real(x);
        format!(
            "{},{},{},{},{},{},{},{}",
            self.k,
            self.n_points,
            f(self.term_kernel_mismatch),
            f(self.term_gap),
            f(self.total_bound),
            self.exact_w1.map(f).unwrap_or_default(),
            self.coupling_bound.map(f).unwrap_or_default(),
            self.inverse_moment_l1.map(f).unwrap_or_default()
        )
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| MiwError::Domain(e.to_string()))
    }
}

fn check_k<T: Real>(sol: &RadialSolution<T>, target: &TiltedGaussianTarget<T>) -> Result<()> {
    if sol.k != target.k {
        return Err(MiwError::MismatchedK {
            solution: sol.k,
            target: target.k,
        });
    }
    if sol.points.len() < 2 {
        return Err(MiwError::Domain("bound needs at least two points".into()));
    }
    Ok(())
}

/// Per-point ingredients of the bound, in point order.
struct Pieces<T> {
    tau_inf: Vec<T>,
    tau_n: Vec<T>,
    psi1: Vec<T>,
    psi2: Vec<T>,
}

fn pieces<T: Real>(sol: &RadialSolution<T>, target: &TiltedGaussianTarget<T>) -> Result<Pieces<T>> {
    let tau_n = tau_discrete(sol);
    let mut tau_inf = Vec::with_capacity(sol.points.len());
    let mut psi1 = Vec::with_capacity(sol.points.len());
    let mut psi2 = Vec::with_capacity(sol.points.len());
    for &x in &sol.points {
        tau_inf.push(target.stein_kernel(x)?);
        psi1.push(target.psi1(x)?);
        psi2.push(target.psi2(x)?);
    }
    Ok(Pieces {
        tau_inf,
        tau_n,
        psi1,
        psi2,
    })
}

/// Evaluate both terms of the discrete-density bound.
pub fn wasserstein_bound<T: Real>(
    sol: &RadialSolution<T>,
    target: &TiltedGaussianTarget<T>,
) -> Result<BoundReport<T>> {
    check_k(sol, target)?;
    let p = pieces(sol, target)?;
    let n = sol.points.len();
    let nf = T::count(n);
    let mismatch: Vec<T> = (0..n)
        .map(|i| (p.tau_inf[i] - p.tau_n[i]).abs() * p.psi1[i])
        .collect();
    let gap: Vec<T> = (0..n - 1)
        .map(|i| {
            (sol.points[i] - sol.points[i + 1]).abs() * p.tau_n[i] * p.psi2[i].max(p.psi2[i + 1])
        })
        .collect();
    let term_kernel_mismatch = pairwise_sum(&mismatch) / nf;
    let term_gap = pairwise_sum(&gap) / nf;
    Ok(BoundReport {
        k: sol.k,
        n_points: n,
        term_kernel_mismatch,
        term_gap,
        total_bound: term_kernel_mismatch + term_gap,
        exact_w1: None,
        coupling_bound: None,
        inverse_moment_l1: None,
    })
}

/// Bound with `Ψ1 ≤ 1` and `Ψ2 ≤ 2`:
/// `(1/N) Σ |τ_∞ - τ_N| + (2/N) Σ |x_i - x_{i+1}| τ_N`.
pub fn relaxed_bound<T: Real>(
    sol: &RadialSolution<T>,
    target: &TiltedGaussianTarget<T>,
) -> Result<T> {
    check_k(sol, target)?;
    let p = pieces(sol, target)?;
    let n = sol.points.len();
    let nf = T::count(n);
    let mismatch: Vec<T> = (0..n).map(|i| (p.tau_inf[i] - p.tau_n[i]).abs()).collect();
    let gap: Vec<T> = (0..n - 1)
        .map(|i| (sol.points[i] - sol.points[i + 1]).abs() * p.tau_n[i])
        .collect();
    Ok(pairwise_sum(&mismatch) / nf + T::lit(2.0) * pairwise_sum(&gap) / nf)
}

/// `|τ_N(x_i) - τ_∞(x_i)|` for every point.
pub fn kernel_mismatch<T: Real>(sol: &RadialSolution<T>) -> Result<Vec<T>> {
    let tau_n = tau_discrete(sol);
    sol.points
        .iter()
        .zip(tau_n)
        .map(|(&x, tn)| Ok((tau_infinity(sol.k, x)? - tn).abs()))
        .collect()
}
