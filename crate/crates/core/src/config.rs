//! Ground and excited MIW configurations in signed (hyper)spherical
//! coordinates, their count plans, and the interworld potential.
//!
//! Layout conventions:
//! - `d = 2`: one ring of `M` directions with angles in `[0, π)`. The plan
//!   stores a single row of `M` counts and `k_per_shell = [M]`.
//! - `d ≥ 3`: `M` shells, each carrying one polar-angle vector of length
//!   `d - 2` in `[0, π/2]` and `K_j` azimuths in `[0, 2π)`.
//!
//! Radii are signed; `(r, θ)` with `r < 0` is the point `(|r|, θ + π)`.
//! Within a direction they are stored strictly decreasing.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{MiwError, Result};
use crate::radial::{self, signed_power};
use crate::scalar::{pairwise_sum, round_half_even, Real};
use crate::specfn::{invert_monotone, regularized_incomplete_beta, QuadratureSpec};
use crate::stein::TiltedGaussianTarget;
use crate::wasser::{self, CdfLaw, MarginalDistances};

/// `min(|a - b| mod L, L - (|a - b| mod L))`.
pub fn circular_abs<T: Real>(a: T, b: T, period: T) -> T {
    let r = (a - b).abs() % period;
    r.min(period - r)
}

/// `L(x) = max(1, x/2)`.
pub fn penalty_l<T: Real>(x: T) -> T {
    T::one().max(x / T::lit(2.0))
}

// ---------------------------------------------------------------------------
// Count plans
// ---------------------------------------------------------------------------

/// Number of shells, directions per shell and points per direction.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountPlan {
    pub d: usize,
    #[serde(rename = "N")]
    pub n_total: usize,
    /// `M`: shells for `d ≥ 3`, directions for `d = 2`.
    #[serde(rename = "M")]
    pub m_shells: usize,
    /// `K_j`; the singleton `[M]` for `d = 2`.
    #[serde(rename = "K")]
    pub k_per_shell: Vec<usize>,
    /// `n_per_direction[j][k]` is `N_jk` (a single row `N_j` for `d = 2`).
    pub n_per_direction: Vec<Vec<usize>>,
}

impl CountPlan {
    /// `N_{j·}` per shell (the single ring total for `d = 2`).
    pub fn shell_totals(&self) -> Vec<usize> {
        self.n_per_direction
            .iter()
            .map(|r| r.iter().sum())
            .collect()
    }

    /// `K`, the total number of directions.
    pub fn n_directions(&self) -> usize {
        self.n_per_direction.iter().map(Vec::len).sum()
    }

    /// Every distinct per-direction count.
    pub fn distinct_counts(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self.n_per_direction.iter().flatten().copied().collect();
        v.sort_unstable();
        v.dedup();
        v
    }

    /// `(M, K, N_jk)` when every shell and direction is identical.
    pub fn uniform_shape(&self) -> Option<(usize, usize, usize)> {
        let k0 = *self.k_per_shell.first()?;
        let n0 = *self.n_per_direction.first()?.first()?;
        let uniform = self.k_per_shell.iter().all(|&k| k == k0)
            && self.n_per_direction.iter().flatten().all(|&n| n == n0);
        uniform.then_some((self.m_shells, k0, n0))
    }

    /// Structural checks: shapes agree, counts sum to `N`, each count ≥ 2.
    pub fn validate(&self) -> Result<()> {
        let rings = if self.d == 2 { 1 } else { self.m_shells };
        if self.d < 2 || self.n_per_direction.len() != rings || self.k_per_shell.len() != rings {
            return Err(MiwError::DimensionMismatch(format!(
                "plan for d = {} has {} rows and {} shell sizes",
                self.d,
                self.n_per_direction.len(),
                self.k_per_shell.len()
            )));
        }
        for (j, (row, &k)) in self
            .n_per_direction
            .iter()
            .zip(&self.k_per_shell)
            .enumerate()
        {
            if row.len() != k || k == 0 {
                return Err(MiwError::DimensionMismatch(format!(
                    "shell {} lists {} directions but K = {k}",
                    j + 1,
                    row.len()
                )));
            }
            if let Some(i) = row.iter().position(|&n| n < 2) {
                return Err(MiwError::DegenerateDirection {
                    shell: j + 1,
                    direction: i + 1,
                });
            }
        }
        let total: usize = self.shell_totals().iter().sum();
        if total != self.n_total {
            return Err(MiwError::Infeasible(format!(
                "counts sum to {total}, expected {}",
                self.n_total
            )));
        }
        Ok(())
    }

    /// Unequal neighbour pairs in each ring of directions.
    pub fn unequal_ring_pairs(&self) -> Vec<usize> {
        self.n_per_direction
            .iter()
            .map(|row| {
                ring_edges(row.len())
                    .filter(|&(a, b)| row[a] != row[b])
                    .count()
            })
            .collect()
    }
}

/// Split `total` into `parts` near-equal integers; the `total mod parts`
/// leftovers go one each to parts `1, 2, …` (a contiguous run).
pub fn even_allocation(total: usize, parts: usize) -> Vec<usize> {
    if parts == 0 {
        return Vec::new();
    }
    let base = total / parts;
    let extra = total % parts;
    (0..parts).map(|i| base + usize::from(i < extra)).collect()
}

/// Neighbour pairs on a ring of `m` sites: `(j, j+1 mod m)` for `m ≥ 2`.
fn ring_edges(m: usize) -> impl Iterator<Item = (usize, usize)> {
    let n = if m >= 2 { m } else { 0 };
    (0..n).map(move |j| (j, (j + 1) % m))
}

fn ring_imbalance(counts: &[usize]) -> usize {
    ring_edges(counts.len())
        .map(|(a, b)| counts[a].abs_diff(counts[b]))
        .sum()
}

fn line_imbalance(counts: &[usize]) -> usize {
    counts.windows(2).map(|w| w[0].abs_diff(w[1])).sum()
}

/// `4(N - M) + M² + N²/M²`, the reduced 2-D Hamiltonian.
pub fn objective_2d(n_total: usize, m: usize) -> f64 {
    let (n, m) = (n_total as f64, m as f64);
    4.0 * (n - m) + m * m + n * n / (m * m)
}

/// Exact integer minimiser of [`objective_2d`] over `M ∈ [1, N/2]` (ties to
/// the smaller `M`).
pub fn argmin_objective_2d(n_total: usize) -> usize {
    (1..=(n_total / 2).max(1))
        .min_by(|&a, &b| {
            objective_2d(n_total, a)
                .partial_cmp(&objective_2d(n_total, b))
                .expect("finite objective")
                .then(a.cmp(&b))
        })
        .unwrap_or(1)
}

/// 2-D plan: `M = round(√N)` clamped to `[1, N/2]`, counts evenly allocated.
///
/// The exact integer minimiser of [`objective_2d`] can sit one above the
/// asymptotic `√N` (at `N = 484` it is 23); the plan follows `M ~ √N`, which
/// reproduces the 22 × 22 ground state.
pub fn optimize_counts_2d(n_total: usize) -> Result<CountPlan> {
    if n_total < 4 {
        return Err(MiwError::Infeasible(format!(
            "2-D plan needs N >= 4, got {n_total}"
        )));
    }
    let m = round_half_even((n_total as f64).sqrt()).clamp(1, n_total / 2);
    let row = even_allocation(n_total, m);
    let plan = CountPlan {
        d: 2,
        n_total,
        m_shells: m,
        k_per_shell: vec![m],
        n_per_direction: vec![row],
    };
    plan.validate()?;
    Ok(plan)
}

/// Reduced 3-D objective `7N + (M-1)² + N/(4M) · L(Σ|N_{i·} - N_{j·}|)` with
/// shell totals from [`even_allocation`].
pub fn objective_3d(n_total: usize, m: usize) -> f64 {
    let totals = even_allocation(n_total, m);
    let n = n_total as f64;
    let mf = m as f64;
    7.0 * n + (mf - 1.0) * (mf - 1.0) + n / (4.0 * mf) * penalty_l(line_imbalance(&totals) as f64)
}

fn shells_from_totals(
    d: usize,
    n_total: usize,
    totals: &[usize],
    k_of: impl Fn(usize) -> usize,
) -> Result<CountPlan> {
    let mut k_per_shell = Vec::with_capacity(totals.len());
    let mut rows = Vec::with_capacity(totals.len());
    for (j, &t) in totals.iter().enumerate() {
        if t < 2 {
            return Err(MiwError::Infeasible(format!(
                "shell {} would hold {t} points",
                j + 1
            )));
        }
        let k = k_of(t).clamp(1, t / 2);
        k_per_shell.push(k);
        rows.push(even_allocation(t, k));
    }
    let plan = CountPlan {
        d,
        n_total,
        m_shells: totals.len(),
        k_per_shell,
        n_per_direction: rows,
    };
    plan.validate()?;
    Ok(plan)
}

/// 3-D plan: `M ≥ 2` minimising [`objective_3d`], `K_j = round(√(2N_{j·}))`.
pub fn optimize_counts_3d(n_total: usize) -> Result<CountPlan> {
    if n_total < 8 {
        return Err(MiwError::Infeasible(format!(
            "3-D plan needs N >= 8, got {n_total}"
        )));
    }
    // Every shell needs at least one direction of two points.
    let m_max = (n_total / 2).max(2);
    let m = (2..=m_max)
        .min_by(|&a, &b| {
            objective_3d(n_total, a)
                .partial_cmp(&objective_3d(n_total, b))
                .expect("finite objective")
                .then(a.cmp(&b))
        })
        .expect("non-empty range");
    let totals = even_allocation(n_total, m);
    shells_from_totals(3, n_total, &totals, |t| {
        round_half_even((2.0 * t as f64).sqrt())
    })
}

/// Plan for `d ≥ 4` from the asymptotic shape: `M = round(N^{1/d}/2)` shells
/// and `round(N^{1/2 - 1/(2d)})` points per direction.
///
/// Infeasible when fewer than two shells result, since the polar grid needs
/// two endpoints.
pub fn optimize_counts_d(n_total: usize, d: usize) -> Result<CountPlan> {
    if d < 4 {
        return Err(MiwError::Domain(format!(
            "general-d plan is for d >= 4, got {d}"
        )));
    }
    let n = n_total as f64;
    let df = d as f64;
    let m = round_half_even(n.powf(1.0 / df) / 2.0);
    let per_dir = round_half_even(n.powf(0.5 - 0.5 / df));
    if m < 2 || per_dir < 2 {
        return Err(MiwError::Infeasible(format!(
            "N = {n_total} in d = {d} gives M = {m} shells and {per_dir} points per direction"
        )));
    }
    let totals = even_allocation(n_total, m);
    shells_from_totals(d, n_total, &totals, |t| {
        round_half_even(t as f64 / per_dir as f64)
    })
}

/// Dispatch on dimension.
pub fn optimize_counts(n_total: usize, d: usize) -> Result<CountPlan> {
    match d {
        2 => optimize_counts_2d(n_total),
        3 => optimize_counts_3d(n_total),
        d if d >= 4 => optimize_counts_d(n_total, d),
        _ => Err(MiwError::Domain(format!("dimension must be >= 2, got {d}"))),
    }
}

// ---------------------------------------------------------------------------
// Angular laws
// ---------------------------------------------------------------------------

/// `F_d(θ) = I(sin²θ; (d-1)/2, 1/2)`, the polar-angle cdf on `[0, π/2]`.
pub fn hyperspherical_cdf<T: Real>(theta: T, d: usize) -> Result<T> {
    let s = theta.sin();
    regularized_incomplete_beta(
        (s * s).min(T::one()),
        T::lit((d as f64 - 1.0) / 2.0),
        T::lit(0.5),
    )
}

/// `G_2(θ) = (θ + sin θ cos θ)/π`.
pub fn g2_cdf<T: Real>(theta: T) -> T {
    (theta + theta.sin() * theta.cos()) / T::PI()
}

/// `G_3(θ) = (cos 3θ - 9 cos θ)/8`, ranging over `[-1, 0]`.
pub fn g3_raw<T: Real>(theta: T) -> T {
    ((T::lit(3.0) * theta).cos() - T::lit(9.0) * theta.cos()) / T::lit(8.0)
}

/// `A(φ) = (φ - sin φ cos φ)/(2π)`.
pub fn excited_azimuth_cdf<T: Real>(phi: T) -> T {
    (phi - phi.sin() * phi.cos()) / (T::lit(2.0) * T::PI())
}

/// Law of one angular coordinate, described by a cdf on `[0, upper]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AngularLaw {
    /// Uniform on `[0, π)`: 2-D ground-state directions.
    UniformHalfTurn,
    /// Uniform on `[0, 2π)`: ground-state azimuths.
    UniformTurn,
    /// `F_d` on `[0, π/2]`: ground-state polar angles.
    Hyperspherical { d: usize },
    /// `G_2` on `[0, π)`.
    ExcitedPolar2,
    /// `G_3 + 1` on `[0, π/2]`.
    ExcitedPolar3,
    /// `A` on `[0, 2π)`.
    ExcitedAzimuth,
    /// Piecewise-linear cdf through `(knots[i], values[i])`; knots start at 0,
    /// values run from 0 to 1.
    Tabulated { knots: Vec<f64>, values: Vec<f64> },
}

impl AngularLaw {
    /// Upper end of the support.
    pub fn upper(&self) -> f64 {
        use std::f64::consts::PI;
        match self {
            Self::UniformHalfTurn | Self::ExcitedPolar2 => PI,
            Self::UniformTurn | Self::ExcitedAzimuth => 2.0 * PI,
            Self::Hyperspherical { .. } | Self::ExcitedPolar3 => PI / 2.0,
            Self::Tabulated { knots, .. } => knots.last().copied().unwrap_or(0.0),
        }
    }

    /// Weight in front of `Σ 1/|ΔF|` in the potential, with `ΔF` measured on
    /// the cdf scale.
    ///
    /// `π Σ 1/|Δθ|_π` and `(π/2) Σ 1/|Δφ|_{2π}` become `Σ 1/|Δu|_1` and
    /// `(1/4) Σ 1/|Δu|_1`; the excited azimuth keeps its `π/2` in front of
    /// `1/|ΔA|`.
    pub fn neighbor_weight(&self) -> f64 {
        match self {
            Self::UniformTurn => 0.25,
            Self::ExcitedAzimuth => std::f64::consts::FRAC_PI_2,
            _ => 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let Self::Tabulated { knots, values } = self {
            let ok = knots.len() >= 2
                && knots.len() == values.len()
                && knots[0] == 0.0
                && values[0] == 0.0
                && *values.last().expect("len >= 2") == 1.0
                && knots.windows(2).all(|w| w[0] < w[1])
                && values.windows(2).all(|w| w[0] <= w[1]);
            if !ok {
                return Err(MiwError::Domain(
                    "tabulated cdf needs increasing knots from 0 and values rising from 0 to 1"
                        .into(),
                ));
            }
        }
        if let Self::Hyperspherical { d } = self {
            if *d < 2 {
                return Err(MiwError::Domain(format!(
                    "hyperspherical law needs d >= 2, got {d}"
                )));
            }
        }
        Ok(())
    }

    /// Normalised cdf, clamped to `[0, 1]` outside the support.
    pub fn cdf<T: Real>(&self, x: T) -> Result<T> {
        let up = T::lit(self.upper());
        if x <= T::zero() {
            return Ok(T::zero());
        }
        if x >= up {
            return Ok(T::one());
        }
        Ok(match self {
            Self::UniformHalfTurn | Self::UniformTurn => x / up,
            Self::Hyperspherical { d } => hyperspherical_cdf(x, *d)?,
            Self::ExcitedPolar2 => g2_cdf(x),
            Self::ExcitedPolar3 => g3_raw(x) + T::one(),
            Self::ExcitedAzimuth => excited_azimuth_cdf(x),
            Self::Tabulated { knots, values } => {
                let xf = x.as_f64();
                let i = knots
                    .partition_point(|&t| t <= xf)
                    .clamp(1, knots.len() - 1);
                let (x0, x1) = (knots[i - 1], knots[i]);
                let (y0, y1) = (values[i - 1], values[i]);
                T::lit(y0 + (y1 - y0) * (xf - x0) / (x1 - x0))
            }
        })
    }

    /// Smallest angle with cdf `u`.
    pub fn quantile<T: Real>(&self, u: T) -> Result<T> {
        if !(u >= T::zero() && u <= T::one()) {
            return Err(MiwError::Domain(format!(
                "quantile level {u} outside [0, 1]"
            )));
        }
        let up = T::lit(self.upper());
        if u == T::zero() {
            return Ok(T::zero());
        }
        if u == T::one() {
            return Ok(up);
        }
        match self {
            Self::UniformHalfTurn | Self::UniformTurn => Ok(u * up),
            Self::Hyperspherical { d: 3 } => Ok((T::one() - u).acos()),
            _ => {
                let spec = QuadratureSpec::default().with_abs_tol(1e-16);
                let mut err = None;
                let x = invert_monotone(
                    |t| match self.cdf(t) {
                        Ok(v) => v,
                        Err(e) => {
                            err = Some(e);
                            T::nan()
                        }
                    },
                    u,
                    T::zero(),
                    up,
                    &spec,
                );
                match err {
                    Some(e) => Err(e),
                    None => x,
                }
            }
        }
    }
}

/// `θ_j = F_d^{-1}((j-1)/(M-1))`, `j = 1..M`.
pub fn polar_grid<T: Real>(m_shells: usize, d: usize) -> Result<Vec<T>> {
    if m_shells < 2 {
        return Err(MiwError::Domain(format!(
            "polar grid needs at least two shells, got {m_shells}"
        )));
    }
    if d < 3 {
        return Err(MiwError::Domain(format!(
            "polar grid needs d >= 3, got {d}"
        )));
    }
    grid_on_line(&AngularLaw::Hyperspherical { d }, m_shells)
}

/// Levels `(j-1)/(M-1)` mapped through the quantile.
fn grid_on_line<T: Real>(law: &AngularLaw, m: usize) -> Result<Vec<T>> {
    if m == 1 {
        return Ok(vec![T::zero()]);
    }
    (0..m)
        .map(|j| law.quantile(T::count(j) / T::count(m - 1)))
        .collect()
}

/// Levels `(j-1)/M` mapped through the quantile.
fn grid_on_ring<T: Real>(law: &AngularLaw, m: usize) -> Result<Vec<T>> {
    (0..m)
        .map(|j| law.quantile(T::count(j) / T::count(m)))
        .collect()
}

// ---------------------------------------------------------------------------
// Configurations
// ---------------------------------------------------------------------------

/// Angular laws and radial exponent defining a state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateSpec {
    /// Tilt exponent of the signed radial law `|r|^k φ(r)`.
    pub radial_k: u32,
    pub polar: AngularLaw,
    /// Ignored for `d = 2`.
    pub azimuth: AngularLaw,
}

impl StateSpec {
    /// Ground state in dimension `d`.
    pub fn ground(d: usize) -> Self {
        if d == 2 {
            Self {
                radial_k: 1,
                polar: AngularLaw::UniformHalfTurn,
                azimuth: AngularLaw::UniformTurn,
            }
        } else {
            Self {
                radial_k: (d - 1) as u32,
                polar: AngularLaw::Hyperspherical { d },
                azimuth: AngularLaw::UniformTurn,
            }
        }
    }
}

/// A `d`-dimensional point configuration in signed (hyper)spherical
/// coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct MiwConfiguration<T> {
    pub plan: CountPlan,
    pub spec: StateSpec,
    /// `d = 2`: one single-element vector per direction. `d ≥ 3`: one
    /// vector of `d - 2` polar angles per shell.
    pub polar_angles: Vec<Vec<T>>,
    /// Azimuths per shell; empty for `d = 2`.
    pub azimuths: Vec<Vec<T>>,
    /// `radii[j][k]` is the strictly decreasing signed radial sequence.
    pub radii: Vec<Vec<Vec<T>>>,
    /// Quantum numbers; all zero for the ground state.
    pub state_label: Vec<u8>,
}

/// One row of the coordinate listing.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigPoint<T> {
    pub shell: usize,
    pub direction: usize,
    pub index: usize,
    pub polar: Vec<T>,
    pub azimuth: Option<T>,
    pub radius: T,
    pub cartesian: Vec<T>,
}

impl<T: Real> MiwConfiguration<T> {
    pub fn d(&self) -> usize {
        self.plan.d
    }

    pub fn n_total(&self) -> usize {
        self.plan.n_total
    }

    /// Unit direction vector for `(shell, direction)`, zero-based.
    pub fn direction_vector(&self, shell: usize, direction: usize) -> Vec<T> {
        let d = self.d();
        if d == 2 {
            let th = self.polar_angles[direction][0];
            return vec![th.cos(), th.sin()];
        }
        let polar = &self.polar_angles[shell];
        let phi = self.azimuths[shell][direction];
        let mut out = Vec::with_capacity(d);
        let mut sin_prod = T::one();
        for &th in polar {
            out.push(sin_prod * th.cos());
            sin_prod = sin_prod * th.sin();
        }
        out.push(sin_prod * phi.cos());
        out.push(sin_prod * phi.sin());
        out
    }

    /// Every point with its coordinates, in shell, direction, radius order.
    pub fn points(&self) -> Vec<ConfigPoint<T>> {
        let mut out = Vec::with_capacity(self.n_total());
        for (j, shell) in self.radii.iter().enumerate() {
            for (k, radii) in shell.iter().enumerate() {
                let u = self.direction_vector(j, k);
                let (polar, azimuth) = if self.d() == 2 {
                    (self.polar_angles[k].clone(), None)
                } else {
                    (self.polar_angles[j].clone(), Some(self.azimuths[j][k]))
                };
                for (n, &r) in radii.iter().enumerate() {
                    out.push(ConfigPoint {
                        shell: j,
                        direction: k,
                        index: n,
                        polar: polar.clone(),
                        azimuth,
                        radius: r,
                        cartesian: u.iter().map(|&c| r * c).collect(),
                    });
                }
            }
        }
        out
    }

    /// Cartesian coordinates of all `N` points.
    pub fn cartesian(&self) -> Vec<Vec<T>> {
        self.points().into_iter().map(|p| p.cartesian).collect()
    }

    /// Every angular and radial invariant of the configuration.
    pub fn validate(&self) -> Result<()> {
        self.plan.validate()?;
        self.spec.polar.validate()?;
        self.spec.azimuth.validate()?;
        let d = self.d();
        let dims = |what: &str| MiwError::DimensionMismatch(what.to_string());
        if self.radii.len() != self.plan.n_per_direction.len() {
            return Err(dims("radial shells disagree with the plan"));
        }
        for (j, (shell, counts)) in self
            .radii
            .iter()
            .zip(&self.plan.n_per_direction)
            .enumerate()
        {
            if shell.len() != counts.len() {
                return Err(dims("radial directions disagree with the plan"));
            }
            for (k, (r, &c)) in shell.iter().zip(counts).enumerate() {
                if r.len() != c {
                    return Err(dims("radial sequence length disagrees with the plan"));
                }
                if r.windows(2).any(|w| !(w[0] > w[1])) {
                    return Err(MiwError::Degenerate(format!(
                        "radii in direction ({}, {}) are not strictly decreasing",
                        j + 1,
                        k + 1
                    )));
                }
            }
        }
        if d == 2 {
            if self.polar_angles.len() != self.plan.m_shells
                || self.polar_angles.iter().any(|v| v.len() != 1)
            {
                return Err(dims("2-D configurations carry one angle per direction"));
            }
            let th: Vec<T> = self.polar_angles.iter().map(|v| v[0]).collect();
            check_increasing(&th, T::zero(), T::PI(), "direction angles")?;
        } else {
            if self.polar_angles.len() != self.plan.m_shells
                || self.polar_angles.iter().any(|v| v.len() != d - 2)
            {
                return Err(dims("each shell needs d - 2 polar angles"));
            }
            for l in 0..d - 2 {
                let col: Vec<T> = self.polar_angles.iter().map(|v| v[l]).collect();
                let half = T::FRAC_PI_2() * (T::one() + T::epsilon());
                if col.iter().any(|&t| t < T::zero() || t > half) {
                    return Err(dims("polar angles must lie in [0, π/2]"));
                }
                if col.windows(2).any(|w| !(w[0] < w[1])) {
                    return Err(MiwError::Degenerate(
                        "polar angles not strictly increasing".into(),
                    ));
                }
            }
            if self.azimuths.len() != self.plan.m_shells {
                return Err(dims("one azimuth list per shell"));
            }
            let two_pi = T::lit(2.0) * T::PI();
            for (az, &k) in self.azimuths.iter().zip(&self.plan.k_per_shell) {
                if az.len() != k {
                    return Err(dims("azimuth count disagrees with K_j"));
                }
                check_increasing(az, T::zero(), two_pi, "azimuths")?;
            }
        }
        Ok(())
    }

    /// CSV listing: one row per point, header mandatory.
    pub fn to_csv(&self) -> String {
        let d = self.d();
        let mut s = String::from(
            "shell_index,direction_index,point_index,polar_angles,azimuth,signed_radius",
        );
        for i in 1..=d {
            let _ = write!(s, ",x{i}");
        }
        s.push('\n');
        for p in self.points() {
            let polar: Vec<String> = p.polar.iter().map(|&t| fmt_real(t)).collect();
            let _ = write!(
                s,
                "{},{},{},{},{},{}",
                p.shell + 1,
                p.direction + 1,
                p.index + 1,
                polar.join(";"),
                p.azimuth.map(fmt_real).unwrap_or_default(),
                fmt_real(p.radius)
            );
            for &c in &p.cartesian {
                let _ = write!(s, ",{}", fmt_real(c));
            }
            s.push('\n');
        }
        s
    }

    /// Full JSON document (plan, laws, angles, radii, label).
    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| MiwError::Domain(e.to_string()))
    }
}

fn check_increasing<T: Real>(v: &[T], lo: T, hi: T, what: &str) -> Result<()> {
    if v.iter().any(|&t| t < lo || t >= hi) {
        return Err(MiwError::OutOfRange {
            value: v
                .iter()
                .copied()
                .find(|&t| t < lo || t >= hi)
                .map_or(f64::NAN, Real::as_f64),
            period: hi.as_f64(),
        });
    }
    if v.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(MiwError::Degenerate(format!(
            "{what} not strictly increasing"
        )));
    }
    Ok(())
}

/// Shortest decimal that round-trips through `f64`.
pub(crate) fn fmt_real<T: Real>(x: T) -> String {
    format!("{}", x.as_f64())
}

/// Assemble a configuration from a plan and a state description.
///
/// Radial sequences are solved once per distinct count.
pub fn build_state<T: Real>(
    plan: CountPlan,
    spec: StateSpec,
    state_label: Vec<u8>,
) -> Result<MiwConfiguration<T>> {
    plan.validate()?;
    spec.polar.validate()?;
    spec.azimuth.validate()?;
    let d = plan.d;
    let mut cache: BTreeMap<usize, Vec<T>> = BTreeMap::new();
    for n in plan.distinct_counts() {
        let sol = radial::solve_symmetric::<T>(spec.radial_k, n, radial::DEFAULT_TOL)?;
        cache.insert(n, sol.points);
    }
    let radii = plan
        .n_per_direction
        .iter()
        .map(|row| row.iter().map(|n| cache[n].clone()).collect())
        .collect();
    let (polar_angles, azimuths) = if d == 2 {
        let th = grid_on_ring::<T>(&spec.polar, plan.m_shells)?;
        (th.into_iter().map(|t| vec![t]).collect(), Vec::new())
    } else {
        let th = grid_on_line::<T>(&spec.polar, plan.m_shells)?;
        let polar = th.into_iter().map(|t| vec![t; d - 2]).collect();
        let az = plan
            .k_per_shell
            .iter()
            .map(|&k| grid_on_ring::<T>(&spec.azimuth, k))
            .collect::<Result<Vec<_>>>()?;
        (polar, az)
    };
    let cfg = MiwConfiguration {
        plan,
        spec,
        polar_angles,
        azimuths,
        radii,
        state_label,
    };
    cfg.validate()?;
    Ok(cfg)
}

/// Ground state: optimal plan, uniform angular grids, radial exponent `d - 1`.
pub fn build_ground_state<T: Real>(n_total: usize, d: usize) -> Result<MiwConfiguration<T>> {
    let plan = optimize_counts(n_total, d)?;
    build_state(plan, StateSpec::ground(d), vec![0; d])
}

/// Preset excited states: `(1,0)` in 2-D and `(1,0,0)` in 3-D.
///
/// All-zero quanta give the ground state. Other patterns need
/// [`build_excited_state_with`].
pub fn build_excited_state<T: Real>(
    n_total: usize,
    d: usize,
    quanta: &[u8],
) -> Result<MiwConfiguration<T>> {
    if quanta.len() != d {
        return Err(MiwError::DimensionMismatch(format!(
            "{} quantum numbers for d = {d}",
            quanta.len()
        )));
    }
    if quanta.iter().all(|&q| q == 0) {
        return build_ground_state(n_total, d);
    }
    let spec = match (d, quanta) {
        (2, [1, 0]) => StateSpec {
            radial_k: 3,
            polar: AngularLaw::ExcitedPolar2,
            azimuth: AngularLaw::UniformTurn,
        },
        (3, [1, 0, 0]) => StateSpec {
            radial_k: 4,
            polar: AngularLaw::ExcitedPolar3,
            azimuth: AngularLaw::ExcitedAzimuth,
        },
        _ => return Err(MiwError::UnsupportedQuanta(quanta.to_vec())),
    };
    build_excited_state_with(n_total, d, quanta, spec)
}

/// Excited state with caller-supplied radial exponent and angular laws.
pub fn build_excited_state_with<T: Real>(
    n_total: usize,
    d: usize,
    quanta: &[u8],
    spec: StateSpec,
) -> Result<MiwConfiguration<T>> {
    if !(2..=3).contains(&d) {
        return Err(MiwError::Domain(format!(
            "excited states are built for d in {{2, 3}}, got {d}"
        )));
    }
    if quanta.len() != d || quanta.iter().any(|&q| q > 1) {
        return Err(MiwError::UnsupportedQuanta(quanta.to_vec()));
    }
    let plan = optimize_counts(n_total, d)?;
    build_state(plan, spec, quanta.to_vec())
}

// ---------------------------------------------------------------------------
// Potential
// ---------------------------------------------------------------------------

/// `(k+1)² Σ_n [1/(R(r_{n+1}) - R(r_n)) - 1/(R(r_n) - R(r_{n-1}))]² r_n^{2k}`
/// with `R(r) = sign(r)|r|^{k+1}`; reciprocals reaching past either end are 0.
pub fn radial_potential<T: Real>(radii: &[T], k: u32) -> Result<T> {
    let n = radii.len();
    if n < 2 {
        return Err(MiwError::DegenerateDirection {
            shell: 0,
            direction: 0,
        });
    }
    let big_r: Vec<T> = radii.iter().map(|&r| signed_power(r, k + 1)).collect();
    let mut recips = Vec::with_capacity(n - 1);
    for w in big_r.windows(2) {
        let gap = w[1] - w[0];
        if !(gap < T::zero()) {
            return Err(MiwError::Degenerate("radii not strictly decreasing".into()));
        }
        recips.push(gap.recip());
    }
    let terms: Vec<T> = (0..n)
        .map(|i| {
            let fwd = if i + 1 < n { recips[i] } else { T::zero() };
            let back = if i > 0 { recips[i - 1] } else { T::zero() };
            let diff = fwd - back;
            diff * diff * radii[i].abs().powi(2 * k as i32)
        })
        .collect();
    let kp1 = T::count(k as usize + 1);
    Ok(kp1 * kp1 * pairwise_sum(&terms))
}

/// `Σ 1/arc` over neighbouring cdf values on the unit circle.
fn ring_reciprocal_sum<T: Real>(u: &[T]) -> Result<T> {
    let m = u.len();
    if m == 1 {
        return Ok(T::one());
    }
    let terms: Vec<T> = ring_edges(m)
        .map(|(a, b)| {
            // Forward arc; it equals |·|_1 whenever no arc exceeds one half.
            let mut arc = u[b] - u[a];
            if b == 0 {
                arc = arc + T::one();
            }
            arc.recip()
        })
        .collect();
    finite_sum(&terms, "coincident angular neighbours")
}

fn line_reciprocal_sum<T: Real>(u: &[T]) -> Result<T> {
    let terms: Vec<T> = u.windows(2).map(|w| (w[1] - w[0]).abs().recip()).collect();
    finite_sum(&terms, "coincident polar angles")
}

fn finite_sum<T: Real>(terms: &[T], what: &str) -> Result<T> {
    let s = pairwise_sum(terms);
    if s.is_finite() {
        Ok(s)
    } else {
        Err(MiwError::Degenerate(what.into()))
    }
}

/// The five groups of terms making up the interworld potential.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct PotentialTerms<T> {
    /// Radial telescoping reciprocals summed over directions.
    pub radial: T,
    /// Polar (2-D: direction) neighbour reciprocals.
    pub polar: T,
    /// Azimuthal neighbour reciprocals; 0 for `d = 2`.
    pub azimuthal: T,
    /// Direction-count imbalance penalties.
    pub direction_balance: T,
    /// Shell-total imbalance penalty; 0 for `d = 2`.
    pub shell_balance: T,
}

impl<T: Real> PotentialTerms<T> {
    pub fn total(&self) -> T {
        self.radial + self.polar + self.azimuthal + self.direction_balance + self.shell_balance
    }
}

/// Term-by-term interworld potential.
pub fn potential_terms<T: Real>(cfg: &MiwConfiguration<T>) -> Result<PotentialTerms<T>> {
    cfg.plan.validate()?;
    let d = cfg.d();
    let k = cfg.spec.radial_k;
    let mut radial_terms = Vec::with_capacity(cfg.plan.n_directions());
    for (j, shell) in cfg.radii.iter().enumerate() {
        for (i, r) in shell.iter().enumerate() {
            if r.len() < 2 {
                return Err(MiwError::DegenerateDirection {
                    shell: j + 1,
                    direction: i + 1,
                });
            }
            radial_terms.push(radial_potential(r, k)?);
        }
    }
    let radial = pairwise_sum(&radial_terms);
    let n = T::count(cfg.n_total());
    let m = T::count(cfg.plan.m_shells);

    if d == 2 {
        let u = cfg
            .polar_angles
            .iter()
            .map(|v| cfg.spec.polar.cdf(v[0]))
            .collect::<Result<Vec<T>>>()?;
        let polar = T::lit(cfg.spec.polar.neighbor_weight()) * ring_reciprocal_sum(&u)?;
        let imbalance = T::count(ring_imbalance(&cfg.plan.n_per_direction[0]));
        let direction_balance = n * n / (m * m) * penalty_l(imbalance);
        return Ok(PotentialTerms {
            radial,
            polar,
            azimuthal: T::zero(),
            direction_balance,
            shell_balance: T::zero(),
        });
    }

    let comps = d - 2;
    let mut polar_parts = Vec::with_capacity(comps);
    for l in 0..comps {
        let u = cfg
            .polar_angles
            .iter()
            .map(|v| cfg.spec.polar.cdf(v[l]))
            .collect::<Result<Vec<T>>>()?;
        polar_parts.push(line_reciprocal_sum(&u)?);
    }
    let polar =
        T::lit(cfg.spec.polar.neighbor_weight()) * pairwise_sum(&polar_parts) / T::count(comps);

    let w_az = T::lit(cfg.spec.azimuth.neighbor_weight());
    let mut az_parts = Vec::with_capacity(cfg.plan.m_shells);
    let mut bal_parts = Vec::with_capacity(cfg.plan.m_shells);
    for (az, counts) in cfg.azimuths.iter().zip(&cfg.plan.n_per_direction) {
        let u = az
            .iter()
            .map(|&p| cfg.spec.azimuth.cdf(p))
            .collect::<Result<Vec<T>>>()?;
        az_parts.push(ring_reciprocal_sum(&u)?);
        let nj = T::count(counts.iter().sum());
        let kj = T::count(counts.len());
        bal_parts.push(nj * nj / (kj * kj) * penalty_l(T::count(ring_imbalance(counts))));
    }
    let totals = cfg.plan.shell_totals();
    let shell_balance = n / (T::lit(4.0) * T::count(comps) * m.powi(comps as i32))
        * penalty_l(T::count(line_imbalance(&totals)));
    Ok(PotentialTerms {
        radial,
        polar,
        azimuthal: w_az * pairwise_sum(&az_parts),
        direction_balance: pairwise_sum(&bal_parts),
        shell_balance,
    })
}

/// Interworld potential `U_d`.
pub fn interworld_potential<T: Real>(cfg: &MiwConfiguration<T>) -> Result<T> {
    potential_terms(cfg).map(|t| t.total())
}

/// `H_d = U_d + Σ r²`.
pub fn hamiltonian<T: Real>(cfg: &MiwConfiguration<T>) -> Result<T> {
    let u = interworld_potential(cfg)?;
    let squares: Vec<T> = cfg
        .radii
        .iter()
        .flatten()
        .flatten()
        .map(|&r| r * r)
        .collect();
    Ok(u + pairwise_sum(&squares))
}

impl<T: Real> CdfLaw<T> for AngularLaw {
    fn cdf(&self, x: T) -> Result<T> {
        AngularLaw::cdf(self, x)
    }
}

// ---------------------------------------------------------------------------
// Distances to the continuum law
// ---------------------------------------------------------------------------

/// Per-coordinate distances of a configuration to its continuum law.
///
/// Every point contributes its own coordinates, so an angle shared by a
/// direction of `N_jk` points carries weight `N_jk/N`. Each polar component is
/// measured against the polar law of the state, the law the grid was built
/// from.
pub fn marginal_distances<T: Real>(cfg: &MiwConfiguration<T>) -> Result<MarginalDistances<T>> {
    let d = cfg.d();
    let target = TiltedGaussianTarget::<T>::new(cfg.spec.radial_k)?;
    let pts = cfg.points();
    let radii: Vec<T> = pts.iter().map(|p| p.radius).collect();
    let radial = wasser::w1_empirical_vs_cdf(&radii, &target)?;
    let comps = if d == 2 { 1 } else { d - 2 };
    let polar = (0..comps)
        .map(|l| {
            let angles: Vec<T> = pts.iter().map(|p| p.polar[l]).collect();
            wasser::w1_empirical_vs_cdf(&angles, &cfg.spec.polar)
        })
        .collect::<Result<Vec<T>>>()?;
    let azimuthal = if d == 2 {
        None
    } else {
        let az: Vec<T> = pts.iter().filter_map(|p| p.azimuth).collect();
        Some(wasser::w1_empirical_vs_cdf(&az, &cfg.spec.azimuth)?)
    };
    Ok(MarginalDistances {
        radial,
        polar,
        azimuthal,
        m_mu: wasser::mean_abs_deviation(&radii)?,
        m_nu: target.mean_abs()?,
    })
}

/// Spherical-coordinate bound on the distance between a configuration and
/// its continuum law.
pub fn distance_bound<T: Real>(cfg: &MiwConfiguration<T>) -> Result<T> {
    wasser::spherical_combine(&marginal_distances(cfg)?, cfg.d())
}
