//! Exact Wasserstein-1 distances on the line and the spherical-coordinate
//! combination bound.
//!
//! On the line `W1(μ, ν) = ∫ |F_μ - F_ν|`. Against an empirical law the
//! integrand is `|c - F|` with `c` constant between order statistics, so each
//! piece splits at the crossing `F(x) = c` and reduces to antiderivatives of `F`.

use serde::{Deserialize, Serialize};

use crate::error::{MiwError, Result};
use crate::scalar::{pairwise_sum, Real};
use crate::specfn::{self, QuadratureSpec};
use crate::stein::TiltedGaussianTarget;

/// Mass below which a tail of a quadrature-only law is dropped.
pub const TAIL_TRUNCATION: f64 = 1e-14;

/// A law on the real line given through its cdf.
///
/// `cdf_integral` and `survival_integral` are the antiderivatives
/// `∫_{-∞}^x F` and `∫_x^∞ (1 - F)`; laws without closed forms return `None`
/// and the engine falls back to adaptive quadrature.
pub trait CdfLaw<T: Real> {
    fn cdf(&self, x: T) -> Result<T>;

    fn survival(&self, x: T) -> Result<T> {
        Ok(T::one() - self.cdf(x)?)
    }

    fn cdf_integral(&self, _x: T) -> Option<Result<T>> {
        None
    }

    fn survival_integral(&self, _x: T) -> Option<Result<T>> {
        None
    }
}

impl<T: Real> CdfLaw<T> for TiltedGaussianTarget<T> {
    fn cdf(&self, x: T) -> Result<T> {
        TiltedGaussianTarget::cdf(self, x)
    }

    fn survival(&self, x: T) -> Result<T> {
        TiltedGaussianTarget::survival(self, x)
    }

    fn cdf_integral(&self, x: T) -> Option<Result<T>> {
        Some(TiltedGaussianTarget::cdf_integral(self, x))
    }

    fn survival_integral(&self, x: T) -> Option<Result<T>> {
        Some(TiltedGaussianTarget::survival_integral(self, x))
    }
}

/// Uniform law on `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct UniformLaw<T> {
    pub lo: T,
    pub hi: T,
}

impl<T: Real> UniformLaw<T> {
    pub fn new(lo: T, hi: T) -> Result<Self> {
        if !(hi > lo) {
            return Err(MiwError::Domain(format!(
                "uniform law needs lo < hi, got [{lo}, {hi}]"
            )));
        }
        Ok(Self { lo, hi })
    }
}

impl<T: Real> CdfLaw<T> for UniformLaw<T> {
    fn cdf(&self, x: T) -> Result<T> {
        Ok(((x - self.lo) / (self.hi - self.lo))
            .max(T::zero())
            .min(T::one()))
    }

    fn survival(&self, x: T) -> Result<T> {
        Ok(((self.hi - x) / (self.hi - self.lo))
            .max(T::zero())
            .min(T::one()))
    }

    fn cdf_integral(&self, x: T) -> Option<Result<T>> {
        let len = self.hi - self.lo;
        let two = T::lit(2.0);
        Some(Ok(if x <= self.lo {
            T::zero()
        } else if x < self.hi {
            (x - self.lo) * (x - self.lo) / (two * len)
        } else {
            len / two + (x - self.hi)
        }))
    }

    fn survival_integral(&self, x: T) -> Option<Result<T>> {
        let len = self.hi - self.lo;
        let two = T::lit(2.0);
        Some(Ok(if x >= self.hi {
            T::zero()
        } else if x > self.lo {
            (self.hi - x) * (self.hi - x) / (two * len)
        } else {
            len / two + (self.lo - x)
        }))
    }
}

/// A cdf known only pointwise; integrals go through quadrature.
pub struct FnCdf<F> {
    pub cdf: F,
}

impl<T: Real, F: Fn(T) -> T> CdfLaw<T> for FnCdf<F> {
    fn cdf(&self, x: T) -> Result<T> {
        Ok((self.cdf)(x))
    }
}

/// Distance together with an absolute error bar.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct W1Estimate<T> {
    pub value: T,
    pub error_bar: T,
}

fn sorted_finite<T: Real>(points: &[T]) -> Result<Vec<T>> {
    if points.is_empty() {
        return Err(MiwError::EmptyInput);
    }
    if points.iter().any(|x| !x.is_finite()) {
        return Err(MiwError::Domain("points must be finite".into()));
    }
    let mut v = points.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    Ok(v)
}

/// Integral engine for one law: closed forms when available.
struct Engine<'a, T: Real, L: CdfLaw<T> + ?Sized> {
    law: &'a L,
    spec: QuadratureSpec,
    error: Vec<T>,
}

impl<'a, T: Real, L: CdfLaw<T> + ?Sized> Engine<'a, T, L> {
    /// `∫_a^b F`.
    fn int_cdf(&mut self, a: T, b: T) -> Result<T> {
        if b <= a {
            return Ok(T::zero());
        }
        let mid = (a + b) / T::lit(2.0);
        // Antiderivatives are evaluated on the side where they stay small.
        if mid <= T::zero() {
            if let (Some(gb), Some(ga)) = (self.law.cdf_integral(b), self.law.cdf_integral(a)) {
                return Ok(gb? - ga?);
            }
        } else if let (Some(ha), Some(hb)) =
            (self.law.survival_integral(a), self.law.survival_integral(b))
        {
            return Ok((b - a) - (ha? - hb?));
        }
        let law = self.law;
        let q = specfn::integrate(|x| law.cdf(x).unwrap_or(T::nan()), a, b, &self.spec)?;
        self.error.push(q.abs_error);
        Ok(q.value)
    }

    /// `∫_{-∞}^b F`.
    fn left_tail(&mut self, b: T) -> Result<T> {
        if let Some(g) = self.law.cdf_integral(b) {
            return g;
        }
        let cut = T::lit(TAIL_TRUNCATION);
        let mut width = T::one();
        let mut lo = b - width;
        let mut guard = 0;
        while self.law.cdf(lo)? > cut {
            width = width * T::lit(2.0);
            lo = b - width;
            guard += 1;
            if guard > 200 {
                return Err(MiwError::Domain("cdf does not vanish at -infinity".into()));
            }
        }
        self.error.push(cut * width.max(T::one()));
        self.int_cdf(lo, b)
    }

    /// `∫_a^∞ (1 - F)`.
    fn right_tail(&mut self, a: T) -> Result<T> {
        if let Some(h) = self.law.survival_integral(a) {
            return h;
        }
        let cut = T::lit(TAIL_TRUNCATION);
        let mut width = T::one();
        let mut hi = a + width;
        let mut guard = 0;
        while self.law.survival(hi)? > cut {
            width = width * T::lit(2.0);
            hi = a + width;
            guard += 1;
            if guard > 200 {
                return Err(MiwError::Domain("cdf does not reach 1 at +infinity".into()));
            }
        }
        self.error.push(cut * width.max(T::one()));
        let mass = self.int_cdf(a, hi)?;
        Ok((hi - a) - mass)
    }

    /// `∫_a^b |c - F|` for `a < b`.
    fn piece(&mut self, a: T, b: T, c: T, fa: T, fb: T) -> Result<T> {
        let len = b - a;
        if fa >= c {
            return Ok(self.int_cdf(a, b)? - c * len);
        }
        if fb <= c {
            return Ok(c * len - self.int_cdf(a, b)?);
        }
        let law = self.law;
        let inv_spec = self.spec.with_abs_tol(self.spec.abs_tol.min(1e-14));
        let xs = specfn::invert_monotone(|x| law.cdf(x).unwrap_or(T::nan()), c, a, b, &inv_spec)?;
        let below = c * (xs - a) - self.int_cdf(a, xs)?;
        let above = self.int_cdf(xs, b)? - c * (b - xs);
        Ok(below.max(T::zero()) + above.max(T::zero()))
    }
}

/// `W1` between the empirical law of `points` and `law`, with error bar.
pub fn w1_empirical_vs_cdf_detailed<T: Real, L: CdfLaw<T> + ?Sized>(
    points: &[T],
    law: &L,
    spec: &QuadratureSpec,
) -> Result<W1Estimate<T>> {
    spec.validate()?;
    let ys = sorted_finite(points)?;
    let n = ys.len();
    let nf = T::count(n);
    let mut eng = Engine {
        law,
        spec: *spec,
        error: Vec::new(),
    };
    let mut cdf_vals = Vec::with_capacity(n);
    for &y in &ys {
        cdf_vals.push(law.cdf(y)?);
    }
    // Rounding in the cdf can reverse order by a few ulps between adjacent
    // atoms; absorb that with a running maximum and reject anything larger.
    let slack = T::epsilon() * T::lit(64.0);
    for i in 1..n {
        if cdf_vals[i] < cdf_vals[i - 1] {
            if cdf_vals[i - 1] - cdf_vals[i] > slack {
                return Err(MiwError::NonMonotone { at: ys[i].as_f64() });
            }
            cdf_vals[i] = cdf_vals[i - 1];
        }
    }
    let mut pieces = Vec::with_capacity(n + 1);
    pieces.push(eng.left_tail(ys[0])?);
    for j in 1..n {
        let (a, b) = (ys[j - 1], ys[j]);
        if b > a {
            let c = T::count(j) / nf;
            pieces.push(eng.piece(a, b, c, cdf_vals[j - 1], cdf_vals[j])?);
        }
    }
    pieces.push(eng.right_tail(ys[n - 1])?);
    let value = pairwise_sum(&pieces);
    let rounding = T::epsilon() * T::lit(16.0) * T::count(n + 1);
    Ok(W1Estimate {
        value: value.max(T::zero()),
        error_bar: pairwise_sum(&eng.error) + rounding,
    })
}

/// `∫ |F_N - F| dx`.
pub fn w1_empirical_vs_cdf<T: Real, L: CdfLaw<T> + ?Sized>(points: &[T], law: &L) -> Result<T> {
    let spec = QuadratureSpec::default().with_abs_tol(1e-11);
    Ok(w1_empirical_vs_cdf_detailed(points, law, &spec)?.value)
}

/// Distance on the line between the empirical law of `angles` and
/// uniform(0, period).
pub fn w1_empirical_vs_uniform_angles<T: Real>(angles: &[T], period: T) -> Result<T> {
    if !(period > T::zero()) {
        return Err(MiwError::Domain(format!(
            "period must be positive, got {period}"
        )));
    }
    if let Some(&bad) = angles.iter().find(|&&a| !(a >= T::zero() && a < period)) {
        return Err(MiwError::OutOfRange {
            value: bad.as_f64(),
            period: period.as_f64(),
        });
    }
    w1_empirical_vs_cdf(angles, &UniformLaw::new(T::zero(), period)?)
}

/// Exact `W1` between two empirical laws with the same number of atoms.
pub fn w1_empirical_empirical<T: Real>(a: &[T], b: &[T]) -> Result<T> {
    if a.len() != b.len() {
        return Err(MiwError::DimensionMismatch(format!(
            "empirical laws of sizes {} and {}",
            a.len(),
            b.len()
        )));
    }
    let sa = sorted_finite(a)?;
    let sb = sorted_finite(b)?;
    let diffs: Vec<T> = sa.iter().zip(&sb).map(|(&x, &y)| (x - y).abs()).collect();
    Ok(pairwise_sum(&diffs) / T::count(a.len()))
}

/// Mean of `|x|` over a point set.
pub fn mean_abs_deviation<T: Real>(points: &[T]) -> Result<T> {
    if points.is_empty() {
        return Err(MiwError::EmptyInput);
    }
    let abs: Vec<T> = points.iter().map(|x| x.abs()).collect();
    Ok(pairwise_sum(&abs) / T::count(points.len()))
}

/// Per-coordinate distances of two laws written in signed spherical
/// coordinates, plus the mean absolute radial deviations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct MarginalDistances<T> {
    pub radial: T,
    /// One entry per polar angle: `d - 2` for `d ≥ 3`, one for `d = 2`.
    pub polar: Vec<T>,
    /// Absent for `d = 2`.
    pub azimuthal: Option<T>,
    pub m_mu: T,
    pub m_nu: T,
}

/// `radial + √(m_μ m_ν)·(Σ polar + azimuthal)`.
pub fn spherical_combine<T: Real>(md: &MarginalDistances<T>, d: usize) -> Result<T> {
    let expected_polar = if d == 2 { 1 } else { d.saturating_sub(2) };
    let consistent =
        d >= 2 && md.polar.len() == expected_polar && (d == 2) == md.azimuthal.is_none();
    if !consistent {
        return Err(MiwError::DimensionMismatch(format!(
            "d = {d} with {} polar entries and azimuthal {}",
            md.polar.len(),
            if md.azimuthal.is_some() {
                "present"
            } else {
                "absent"
            }
        )));
    }
    let fields = std::iter::once(md.radial)
        .chain(md.polar.iter().copied())
        .chain(md.azimuthal)
        .chain([md.m_mu, md.m_nu]);
    for v in fields {
        if !(v >= T::zero()) || !v.is_finite() {
            return Err(MiwError::Domain(format!(
                "marginal distance {v} is not a finite nonnegative value"
            )));
        }
    }
    let angular = pairwise_sum(&md.polar) + md.azimuthal.unwrap_or(T::zero());
    Ok(md.radial + (md.m_mu * md.m_nu).sqrt() * angular)
}
