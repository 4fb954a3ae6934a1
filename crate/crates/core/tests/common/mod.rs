//! Independent oracles shared by the integration tests.
//!
//! Nothing here calls into the library's special functions; every value is
//! produced by brute-force quadrature or closed-form recurrences.

#![allow(dead_code)]

use std::io::Write;

/// Write one verdict line straight to the process stderr so it survives
/// libtest output capture.
pub fn report(id: &str, pass: bool, detail: &str) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    let line = format!("[acceptance] {verdict} {id}: {detail}\n");
    let _ = std::io::stderr().write_all(line.as_bytes());
}

/// `Γ(n/2)` for a positive integer `n`, from `Γ(1) = 1`, `Γ(1/2) = √π`.
pub fn gamma_half(n: u32) -> f64 {
    assert!(n > 0);
    let (mut g, mut a) = if n.is_multiple_of(2) {
        (1.0, 1.0)
    } else {
        (std::f64::consts::PI.sqrt(), 0.5)
    };
    while 2.0 * a < n as f64 {
        g *= a;
        a += 1.0;
    }
    g
}

/// Composite Simpson rule with `2 * half_panels` subintervals.
pub fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, half_panels: usize) -> f64 {
    let n = 2 * half_panels;
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(a + i as f64 * h);
    }
    s * h / 3.0
}

/// `τ_∞(x; k) = ∫_x^∞ t^{k+1} e^{-(t²-x²)/2} dt / x^k` for `x > 0`.
pub fn tau_oracle(k: u32, x: f64) -> f64 {
    assert!(x > 0.0);
    let f = |t: f64| (t / x).powi(k as i32) * t * (-(t * t - x * x) / 2.0).exp();
    simpson(f, x, x + 40.0, 200_000)
}

/// Unnormalised tilted density `|x|^k e^{-x²/2}`.
pub fn tilted_unnormalised(k: u32, x: f64) -> f64 {
    x.abs().powi(k as i32) * (-x * x / 2.0).exp()
}

/// Cdf of the tilted Gaussian by Simpson quadrature on a fine table.
pub struct TabulatedCdf {
    lo: f64,
    h: f64,
    values: Vec<f64>,
}

impl TabulatedCdf {
    pub fn tilted(k: u32) -> Self {
        let (lo, hi, cells) = (-14.0, 14.0, 28_000usize);
        let h = (hi - lo) / cells as f64;
        let mut values = Vec::with_capacity(cells + 1);
        let mut acc = 0.0;
        values.push(0.0);
        for i in 0..cells {
            let a = lo + i as f64 * h;
            acc += simpson(|t| tilted_unnormalised(k, t), a, a + h, 8);
            values.push(acc);
        }
        let total = acc;
        for v in &mut values {
            *v /= total;
        }
        Self { lo, h, values }
    }

    /// Piecewise-cubic-accurate cdf; linear interpolation inside a cell is
    /// enough at this cell width for the 1e-8 level.
    pub fn cdf(&self, x: f64) -> f64 {
        let t = (x - self.lo) / self.h;
        if t <= 0.0 {
            return 0.0;
        }
        let i = t.floor() as usize;
        if i + 1 >= self.values.len() {
            return 1.0;
        }
        let f = t - i as f64;
        self.values[i] * (1.0 - f) + self.values[i + 1] * f
    }
}

/// `∫ |F_N - F|` by the trapezoid rule on `grid_points` uniform nodes merged
/// with the atoms, over `[min - pad, max + pad]`.
///
/// Atoms are nodes, so `F_N` is constant on every cell and only the kinks of
/// `|c - F|` at crossings contribute discretisation error.
pub fn trapezoid_w1<F: Fn(f64) -> f64>(
    points: &[f64],
    cdf: F,
    pad: f64,
    grid_points: usize,
) -> f64 {
    let mut atoms = points.to_vec();
    atoms.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let lo = atoms[0] - pad;
    let hi = atoms[atoms.len() - 1] + pad;
    let h = (hi - lo) / (grid_points - 1) as f64;
    let mut nodes: Vec<f64> = (0..grid_points).map(|i| lo + i as f64 * h).collect();
    nodes.extend_from_slice(&atoms);
    nodes.sort_by(|a, b| a.partial_cmp(b).unwrap());
    nodes.dedup();
    let n = atoms.len() as f64;
    let mut below = 0usize;
    let mut total = 0.0;
    let mut f_prev = cdf(nodes[0]);
    for w in nodes.windows(2) {
        let (a, b) = (w[0], w[1]);
        while below < atoms.len() && atoms[below] <= a {
            below += 1;
        }
        let c = below as f64 / n;
        let f_next = cdf(b);
        total += 0.5 * (b - a) * ((c - f_prev).abs() + (c - f_next).abs());
        f_prev = f_next;
    }
    total
}

/// Ordinary least-squares slope of `ys` on `xs`.
pub fn ols_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

/// Relative difference with an absolute floor of 1.
pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1.0)
}
