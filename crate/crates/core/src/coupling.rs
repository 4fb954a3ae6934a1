//! k-radial-bias transform of a radial solution, its quantile coupling with
//! the empirical law, and the coupling-based Wasserstein bounds.
//!
//! The bias law `F*` has density `c_n |x|^k` on each interval
//! `(y_n, y_{n+1}]` of the ascending points, with `c_n` fixing the interval
//! mass at `1/(N-1)`. Under the quantile coupling `F` sits at `y_n` below a
//! switch point and at `y_{n+1}` above it, so every expectation is a finite
//! sum of one-dimensional integrals of piecewise polynomials.

use serde::{Deserialize, Serialize};

use crate::error::{MiwError, Result};
use crate::radial::{big_b, big_b_inv, RadialSolution};
use crate::scalar::{pairwise_sum, Real};
use crate::specfn::{erfcx, gamma, integrate, recip_gamma, QuadratureSpec};
use crate::stein::{BoundReport, TiltedGaussianTarget};

/// Largest `k` the general theorem is evaluated for.
pub const MAX_THEOREM_K: u32 = 8;
/// Largest `k` for which the inverse-moment terms are known to be controlled.
pub const VERIFIED_K: u32 = 7;

/// Bias law of a radial solution together with its coupling to `F`.
#[derive(Debug, Clone, PartialEq)]
pub struct BiasTransform<T> {
    pub base: RadialSolution<T>,
    /// Points in ascending order.
    asc: Vec<T>,
    /// `1/((N-1)(B(y_{n+1}) - B(y_n)))` per interval.
    coef: Vec<T>,
    /// Where `F` switches from `y_n` to `y_{n+1}`.
    split: Vec<T>,
}

/// A coupled expectation with its accumulated quadrature error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct CoupledValue<T> {
    pub value: T,
    pub abs_error: T,
}

impl<T: Real> BiasTransform<T> {
    pub fn new(base: RadialSolution<T>) -> Result<Self> {
        let n = base.points.len();
        if n < 2 {
            return Err(MiwError::Domain(
                "bias transform needs at least two points".into(),
            ));
        }
        if base.points.windows(2).any(|w| !(w[0] > w[1])) {
            return Err(MiwError::Degenerate(
                "points must be strictly decreasing".into(),
            ));
        }
        let k = base.k;
        let asc = base.ascending();
        let nm1 = T::count(n - 1);
        let nf = T::count(n);
        let mut coef = Vec::with_capacity(n - 1);
        let mut split = Vec::with_capacity(n - 1);
        for i in 0..n - 1 {
            let (b0, b1) = (big_b(asc[i], k), big_b(asc[i + 1], k));
            let db = b1 - b0;
            coef.push((nm1 * db).recip());
            // Level (i+1)/N of the coupling variable inside this interval.
            let frac = T::one() - T::count(i + 1) / nf;
            let s = big_b_inv(b0 + frac * db, k);
            split.push(s.max(asc[i]).min(asc[i + 1]));
        }
        Ok(Self {
            base,
            asc,
            coef,
            split,
        })
    }

    pub fn k(&self) -> u32 {
        self.base.k
    }

    pub fn n_points(&self) -> usize {
        self.asc.len()
    }

    /// `p*(x)`; zero outside `(x_N, x_1]`.
    pub fn bias_density(&self, x: T) -> T {
        let n = self.asc.len();
        if !(x > self.asc[0]) || x > self.asc[n - 1] {
            return T::zero();
        }
        // First ascending point ≥ x closes the interval (y_{i-1}, y_i].
        let i = self.asc.partition_point(|&y| y < x);
        self.coef[i - 1] * x.abs().powi(self.base.k as i32)
    }

    /// `p*` as printed: `|x|^k Σ_{i≤n} x_i/|x_i|^k` (descending index `n`),
    /// normalised by `1/(N-1)`. Equals [`Self::bias_density`] when the
    /// recursion holds exactly.
    pub fn bias_density_from_sums(&self, x: T) -> T {
        let n = self.asc.len();
        if !(x > self.asc[0]) || x > self.asc[n - 1] {
            return T::zero();
        }
        let k = self.base.k as i32;
        let desc = &self.base.points;
        let below = desc.iter().take_while(|&&p| p >= x).count();
        let terms: Vec<T> = desc[..below].iter().map(|&p| p / p.abs().powi(k)).collect();
        pairwise_sum(&terms) * x.abs().powi(k) / T::count(n - 1)
    }

    /// `max_n |(B(x_n) - B(x_{n+1})) Σ_{i≤n} x_i/|x_i|^k - 1|`.
    pub fn recursion_defect(&self) -> T {
        let n = self.asc.len();
        (0..n - 1)
            .map(|i| {
                let x = self.asc[i + 1];
                let mid = (self.asc[i] + x) / T::lit(2.0);
                let ratio = self.bias_density_from_sums(mid) / self.bias_density(mid);
                (ratio - T::one()).abs()
            })
            .fold(T::zero(), T::max)
    }

    /// `E[g(F, F*)]` under the quantile coupling.
    pub fn expectation<G: FnMut(T, T) -> T>(&self, mut g: G) -> Result<CoupledValue<T>> {
        let k = self.base.k as i32;
        let spec = QuadratureSpec::new(1e-15, 1e-12, 60)?;
        let mut values = Vec::with_capacity(4 * self.coef.len());
        let mut errors = Vec::with_capacity(4 * self.coef.len());
        for i in 0..self.coef.len() {
            let (lo, hi, s) = (self.asc[i], self.asc[i + 1], self.split[i]);
            for (a, b, f) in [(lo, s, lo), (s, hi, hi)] {
                for (a, b) in split_at_zero(a, b) {
                    let q = integrate(|x| g(f, x) * x.abs().powi(k), a, b, &spec)?;
                    values.push(self.coef[i] * q.value);
                    errors.push(self.coef[i] * q.abs_error);
                }
            }
        }
        Ok(CoupledValue {
            value: pairwise_sum(&values),
            abs_error: pairwise_sum(&errors),
        })
    }
}

fn split_at_zero<T: Real>(a: T, b: T) -> Vec<(T, T)> {
    if !(a < b) {
        Vec::new()
    } else if a < T::zero() && b > T::zero() {
        vec![(a, T::zero()), (T::zero(), b)]
    } else {
        vec![(a, b)]
    }
}

/// `p*(x)` of the bias transform.
pub fn bias_density<T: Real>(bt: &BiasTransform<T>, x: T) -> T {
    bt.bias_density(x)
}

/// `E|F - F*|` and its telescoped envelope.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct GapBound<T> {
    pub exact: T,
    pub abs_error: T,
    /// `(1/(N-1)) Σ |x_n - x_{n+1}| = (x_1 - x_N)/(N-1)`.
    pub envelope: T,
}

pub fn coupled_gap_bound<T: Real>(bt: &BiasTransform<T>) -> Result<GapBound<T>> {
    let e = bt.expectation(|f, s| (f - s).abs())?;
    let n = bt.n_points();
    Ok(GapBound {
        exact: e.value,
        abs_error: e.abs_error,
        envelope: (bt.asc[n - 1] - bt.asc[0]) / T::count(n - 1),
    })
}

/// `E|F^{-l} - (F*)^{-l}|` with the pieces of its envelope.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct InverseMomentGap<T> {
    pub l: u32,
    pub exact: T,
    pub abs_error: T,
    /// Contribution of the central interval `(x_{m+1}, x_m]`; for even `N`
    /// it equals `l x_m^{-l} / ((N-1)(k-l+1))`.
    pub central: T,
    /// `(2/(N-1))(1/x_m^l - 1/x_1^l)`, bounding every other interval.
    pub telescoped: T,
}

impl<T: Real> InverseMomentGap<T> {
    /// `central + telescoped ≥ exact`.
    pub fn envelope(&self) -> T {
        self.central + self.telescoped
    }
}

/// Exact inverse-moment gap under the coupling, `1 ≤ l ≤ k` (`l = 0` gives 0).
pub fn inverse_moment_gap<T: Real>(bt: &BiasTransform<T>, l: u32) -> Result<InverseMomentGap<T>> {
    let k = bt.k();
    if l > k {
        return Err(MiwError::Domain(format!(
            "inverse moment of order {l} is not integrable against |x|^{k}"
        )));
    }
    if l == 0 {
        return Ok(InverseMomentGap {
            l,
            exact: T::zero(),
            abs_error: T::zero(),
            central: T::zero(),
            telescoped: T::zero(),
        });
    }
    let pts = &bt.base.points;
    if let Some(i) = pts.iter().position(|&x| x == T::zero()) {
        return Err(MiwError::ZeroPoint { index: i + 1 });
    }
    let li = l as i32;
    let inv = |x: T| x.powi(-li);
    let e = bt.expectation(|f, s| (inv(f) - inv(s)).abs())?;
    let n = bt.n_points();
    let nm1 = T::count(n - 1);
    let m = bt.base.median_index;
    let (x1, xm) = (pts[0], pts[m - 1]);
    let kl = T::count((k - l + 1) as usize);
    let central = T::count(l as usize) * inv(xm) / (nm1 * kl);
    let telescoped = T::lit(2.0) / nm1 * (inv(xm) - inv(x1));
    Ok(InverseMomentGap {
        l,
        exact: e.value,
        abs_error: e.abs_error,
        central,
        telescoped,
    })
}

/// `a_j(k) = 2^j Γ(1+k/2)/Γ(1+k/2-j)`, zero where `Γ(1+k/2-j)` has a pole.
///
/// The printed convention also zeroes `j ≥ k`; the two agree on every
/// index the bounds below evaluate (`k ≥ 2`). They disagree at `a_0(0)` and
/// `a_1(1)`, where the ratio (1 and 1) is what the kernel expansion needs.
pub fn a_coefficient<T: Real>(j: u32, k: u32) -> Result<T> {
    if j == 0 {
        return Ok(T::one());
    }
    let half = T::lit(k as f64 / 2.0);
    let num = gamma(T::one() + half)?;
    let den = recip_gamma(T::one() + half - T::count(j as usize))?;
    Ok(T::lit(2.0).powi(j as i32) * num * den)
}

/// `a_j(k)` with the printed cut-off `a_j(k) = 0` for `j ≥ k`.
pub fn a_coefficient_printed<T: Real>(j: u32, k: u32) -> Result<T> {
    if j >= k {
        Ok(T::zero())
    } else {
        a_coefficient(j, k)
    }
}

fn a_checked<T: Real>(j: u32, k: u32) -> Result<T> {
    let a: T = a_coefficient(j, k)?;
    debug_assert!(
        (a - a_coefficient_printed::<T>(j, k)?).abs() <= T::epsilon() * a.abs(),
        "a_{j}({k}) conventions disagree"
    );
    Ok(a)
}

/// `ε_k(x)`: 0 for even `k`, `e^{x²/2}|x|^{-k} Γ(1/2, x²/2)` for odd `k`.
pub fn epsilon_k<T: Real>(k: u32, x: T) -> T {
    if k.is_multiple_of(2) {
        return T::zero();
    }
    let ax = x.abs();
    T::PI().sqrt() * erfcx(ax / T::SQRT_2()) / ax.powi(k as i32)
}

/// Remainder `a_{⌈k/2⌉}(k) ε_k(x)/√2` of the finite kernel expansion.
pub fn kernel_remainder<T: Real>(k: u32, x: T) -> Result<T> {
    if k.is_multiple_of(2) {
        return Ok(T::zero());
    }
    Ok(a_coefficient::<T>(k.div_ceil(2), k)? * epsilon_k(k, x) / T::SQRT_2())
}

/// `2^{(k+1)/2} |x|^{-(k+1)} Γ(1+k/2)/Γ(1/2)`.
pub fn remainder_bound<T: Real>(k: u32, x: T) -> Result<T> {
    let kf = T::count(k as usize);
    Ok(T::lit(2.0).powf((kf + T::one()) / T::lit(2.0))
        * x.abs().powi(-(k as i32 + 1))
        * gamma(T::one() + kf / T::lit(2.0))?
        / T::PI().sqrt())
}

/// `Σ_{j≤⌊k/2⌋} a_j(k) x^{-2j} + a_{⌈k/2⌉}(k) ε_k(x)/√2`.
pub fn kernel_expansion<T: Real>(k: u32, x: T) -> Result<T> {
    let x2 = x * x;
    let mut terms = Vec::with_capacity(k as usize / 2 + 2);
    for j in 0..=k / 2 {
        terms.push(a_coefficient::<T>(j, k)? / x2.powi(j as i32));
    }
    terms.push(kernel_remainder(k, x)?);
    Ok(pairwise_sum(&terms))
}

/// `2R/(|x|^k τ²)`, bounded by [`kappa1_constant`].
pub fn kappa1<T: Real>(target: &TiltedGaussianTarget<T>, x: T) -> Result<T> {
    let tau = target.stein_kernel(x)?;
    let r = target.r_infinity(x)?;
    Ok(T::lit(2.0) * r / (x.abs().powi(target.k as i32) * tau * tau))
}

/// `2^{(1-k)/2}/Γ((k+1)/2)`.
pub fn kappa1_constant<T: Real>(k: u32) -> Result<T> {
    let kf = T::count(k as usize);
    Ok(T::lit(2.0).powf((T::one() - kf) / T::lit(2.0))
        * recip_gamma((kf + T::one()) / T::lit(2.0))?)
}

/// `2/(|x|^k τ) + 2|2/τ - 1| R/(|x|^{k-1} τ²)`.
pub fn kappa2<T: Real>(target: &TiltedGaussianTarget<T>, x: T) -> Result<T> {
    let k = target.k as i32;
    let tau = target.stein_kernel(x)?;
    let r = target.r_infinity(x)?;
    let two = T::lit(2.0);
    let ax = x.abs();
    Ok(two / (ax.powi(k) * tau)
        + two * (two / tau - T::one()).abs() * r / (ax.powi(k - 1) * tau * tau))
}

/// `3 · 2^{-k/2}/Γ((1+k)/2)`.
pub fn kappa2_constant<T: Real>(k: u32) -> Result<T> {
    let kf = T::count(k as usize);
    Ok(T::lit(3.0)
        * T::lit(2.0).powf(-kf / T::lit(2.0))
        * recip_gamma((kf + T::one()) / T::lit(2.0))?)
}

/// `2R/τ²`, at most 1.
pub fn kappa4<T: Real>(target: &TiltedGaussianTarget<T>, x: T) -> Result<T> {
    target.psi1(x)
}

/// Which printed bound was evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CouplingForm {
    /// `E[(5 + 2|F|)|F - F*|]`.
    RayleighChain,
    /// Specialised `k = 2` and `k = 3` corollaries.
    Corollary,
    /// General even/odd theorem.
    Theorem,
}

/// Coupling bound on `d_W(F_N, F_∞)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct CouplingBound<T> {
    pub k: u32,
    #[serde(rename = "N")]
    pub n_points: usize,
    /// Expectation plus its quadrature error.
    pub value: T,
    pub abs_error: T,
    pub form: CouplingForm,
    /// Set above `k = 7`, where control of the inverse moments is unproven.
    pub beyond_verified_range: bool,
}

fn check_points<T: Real>(bt: &BiasTransform<T>) -> Result<()> {
    match bt.base.points.iter().position(|&x| x == T::zero()) {
        Some(i) => Err(MiwError::ZeroPoint { index: i + 1 }),
        None => Ok(()),
    }
}

fn finish<T: Real>(
    bt: &BiasTransform<T>,
    e: CoupledValue<T>,
    form: CouplingForm,
) -> CouplingBound<T> {
    CouplingBound {
        k: bt.k(),
        n_points: bt.n_points(),
        value: e.value + e.abs_error,
        abs_error: e.abs_error,
        form,
        beyond_verified_range: bt.k() > VERIFIED_K,
    }
}

/// Certified coupling bound: the `k = 1` chain, the `k = 2, 3` corollaries,
/// and the general theorem for `4 ≤ k ≤ 8`.
pub fn coupling_wasserstein_bound<T: Real>(bt: &BiasTransform<T>) -> Result<CouplingBound<T>> {
    check_points(bt)?;
    let k = bt.k();
    let (two, three) = (T::lit(2.0), T::lit(3.0));
    match k {
        1 => {
            let e = bt.expectation(|f, s| (T::lit(5.0) + two * f.abs()) * (f - s).abs())?;
            Ok(finish(bt, e, CouplingForm::RayleighChain))
        }
        2 => {
            let e = bt.expectation(|f, s| {
                let (af, as_) = (f.abs(), s.abs());
                (three + two * af + two / af + two / (af * as_)) * (f - s).abs()
            })?;
            Ok(finish(bt, e, CouplingForm::Corollary))
        }
        3 => {
            let e = bt.expectation(|f, s| {
                let (af, as_) = (f.abs(), s.abs());
                let w = T::lit(21.0)
                    + T::lit(6.0) * af
                    + two * f * f
                    + three / af
                    + T::lit(18.0) / (f * f)
                    + T::lit(9.0) / (s * s)
                    + three / (af * as_);
                w * (f - s).abs()
                    + (f * f - s * s).abs()
                    + T::lit(9.0) * (af + af.powi(3)) * (f.powi(-3) - s.powi(-3)).abs()
            })?;
            Ok(finish(bt, e, CouplingForm::Corollary))
        }
        4..=MAX_THEOREM_K => theorem_bound(bt),
        _ => Err(MiwError::UnsupportedK(k)),
    }
}

/// General even/odd theorem for `2 ≤ k ≤ 8`.
pub fn theorem_bound<T: Real>(bt: &BiasTransform<T>) -> Result<CouplingBound<T>> {
    check_points(bt)?;
    let k = bt.k();
    if !(2..=MAX_THEOREM_K).contains(&k) {
        return Err(MiwError::UnsupportedK(k));
    }
    let two = T::lit(2.0);
    let e = if k.is_multiple_of(2) {
        let l = k / 2;
        let outer: Vec<(i32, T)> = (0..=l)
            .map(|j| Ok((2 * j as i32, a_checked::<T>(l - j, k)?)))
            .collect::<Result<_>>()?;
        let inner: Vec<(i32, T)> = (1..=l)
            .map(|j| Ok((2 * j as i32 - 1, a_checked::<T>(j, k)?)))
            .collect::<Result<_>>()?;
        bt.expectation(|f, s| {
            let gap = (f - s).abs();
            let mut acc = T::zero();
            for &(p, a) in &outer {
                acc = acc + a * ((f.powi(p) - s.powi(p)).abs() + two * f.abs().powi(p) * gap);
            }
            for &(p, a) in &inner {
                acc = acc + a * ((f.powi(-p) - s.powi(-p)).abs() + f.abs().powi(-p) * gap);
            }
            acc
        })?
    } else {
        let l = k.div_ceil(2);
        let outer: Vec<(i32, T)> = (1..=l)
            .map(|j| Ok((2 * j as i32 - 1, a_checked::<T>(l - j, k)?)))
            .collect::<Result<_>>()?;
        let inner: Vec<(i32, T)> = (1..l)
            .map(|j| Ok((2 * j as i32 - 1, a_checked::<T>(j, k)?)))
            .collect::<Result<_>>()?;
        let a_l = T::lit(3.0) * a_checked::<T>(l, k)?;
        let q = 2 * l as i32 - 1;
        let r = 2 * (l as i32 - 1);
        bt.expectation(|f, s| {
            let gap = (f - s).abs();
            let mut acc = T::zero();
            for &(p, a) in &outer {
                acc = acc + a * ((f.powi(p) - s.powi(p)).abs() + two * f.abs().powi(p) * gap);
            }
            for &(p, a) in &inner {
                acc = acc + a * ((f.powi(-p) - s.powi(-p)).abs() + f.abs().powi(-p) * gap);
            }
            let af = f.abs();
            acc + a_l * (two + two / af.powi(r) + s.abs().powi(-r)) * gap
                + a_l * (af + af.powi(q)) * (f.powi(-q) - s.powi(-q)).abs()
        })?
    };
    Ok(finish(bt, e, CouplingForm::Theorem))
}

/// Fill the optional coupling columns of a bound report.
///
/// `coupling_bound` is left empty for `k = 0` and `k > 8`; `inverse_moment_l1`
/// is the exact coupled `E|1/F - 1/F*|` and needs `k ≥ 1`.
pub fn attach_coupling<T: Real>(report: &mut BoundReport<T>, bt: &BiasTransform<T>) -> Result<()> {
    if report.k != bt.k() || report.n_points != bt.n_points() {
        return Err(MiwError::DimensionMismatch(format!(
            "report for (k = {}, N = {}) but transform of (k = {}, N = {})",
            report.k,
            report.n_points,
            bt.k(),
            bt.n_points()
        )));
    }
    let k = bt.k();
    report.coupling_bound = if (1..=MAX_THEOREM_K).contains(&k) {
        Some(coupling_wasserstein_bound(bt)?.value)
    } else {
        None
    };
    report.inverse_moment_l1 = if k >= 1 {
        let g = inverse_moment_gap(bt, 1)?;
        Some(g.exact + g.abs_error)
    } else {
        None
    };
    Ok(())
}

/// `(5 + 2x_1) · 2x_1/(N-1)`, the closed-form end of the `k = 1` chain.
pub fn rayleigh_chain_bound<T: Real>(sol: &RadialSolution<T>) -> T {
    let x1 = sol.x1();
    let n = sol.points.len();
    (T::lit(5.0) + T::lit(2.0) * x1) * T::lit(2.0) * x1 / T::count(n - 1)
}
