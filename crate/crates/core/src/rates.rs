//! Log-log rate fits with optional logarithmic corrections.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{MiwError, Result};

/// Factor `c(N)` divided out before regressing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Correction {
    None,
    /// `√(log N)`.
    SqrtLog,
    /// `(log N)^6`.
    LogPow6,
}

impl Correction {
    pub fn factor(self, n: f64) -> f64 {
        match self {
            Correction::None => 1.0,
            Correction::SqrtLog => n.ln().sqrt(),
            Correction::LogPow6 => n.ln().powi(6),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Correction::None => "none",
            Correction::SqrtLog => "sqrt_log",
            Correction::LogPow6 => "log_pow6",
        }
    }
}

impl fmt::Display for Correction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Correction {
    type Err = MiwError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "none" => Ok(Correction::None),
            "sqrt_log" | "sqrtlog" => Ok(Correction::SqrtLog),
            "log6" | "log_pow6" | "logpow6" => Ok(Correction::LogPow6),
            other => Err(MiwError::Domain(format!("unknown correction '{other}'"))),
        }
    }
}

/// Ordinary least squares of `log(value/c(N))` on `log N`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub exponent: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub n_grid: Vec<usize>,
    pub values: Vec<f64>,
    /// `log(value/c(N))` minus the fitted line, in grid order.
    pub residuals: Vec<f64>,
    pub correction: Correction,
}

/// Fit `value ≈ e^{intercept} c(N) N^{exponent}`.
///
/// Needs at least three pairs with strictly increasing `N ≥ 2` and positive
/// finite values.
pub fn fit_rate(pairs: &[(usize, f64)], correction: Correction) -> Result<RateFit> {
    if pairs.len() < 3 {
        return Err(MiwError::Degenerate(format!(
            "rate fit needs at least three points, got {}",
            pairs.len()
        )));
    }
    if pairs.windows(2).any(|w| w[0].0 >= w[1].0) || pairs[0].0 < 2 {
        return Err(MiwError::Degenerate(
            "N grid must be strictly increasing from 2".into(),
        ));
    }
    if let Some(&(n, v)) = pairs.iter().find(|(_, v)| !(v.is_finite() && *v > 0.0)) {
        return Err(MiwError::Degenerate(format!(
            "value {v} at N = {n} is not positive"
        )));
    }
    let xs: Vec<f64> = pairs.iter().map(|&(n, _)| (n as f64).ln()).collect();
    let ys: Vec<f64> = pairs
        .iter()
        .map(|&(n, v)| (v / correction.factor(n as f64)).ln())
        .collect();
    let m = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / m;
    let my = ys.iter().sum::<f64>() / m;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residuals: Vec<f64> = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| y - intercept - slope * x)
        .collect();
    let sse: f64 = residuals.iter().map(|r| r * r).sum();
    // A perfectly flat response is fitted exactly.
    let r_squared = if syy > 0.0 { 1.0 - sse / syy } else { 1.0 };
    Ok(RateFit {
        exponent: slope,
        intercept,
        r_squared,
        n_grid: pairs.iter().map(|p| p.0).collect(),
        values: pairs.iter().map(|p| p.1).collect(),
        residuals,
        correction,
    })
}

/// `r_k = 3/2 + 4k/5`, the fitted scaling exponent of `x_m`.
pub fn r_k(k: u32) -> f64 {
    1.5 + 0.8 * k as f64
}
