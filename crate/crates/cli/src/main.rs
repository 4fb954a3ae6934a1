use std::fmt::Write as _;
use std::io::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde_json::Value;

use miw_core::config::{
    build_excited_state, build_ground_state, marginal_distances, optimize_counts,
};
use miw_core::coupling::{
    attach_coupling, coupled_gap_bound, coupling_wasserstein_bound, inverse_moment_gap,
    BiasTransform,
};
use miw_core::radial::{kernel_matched_solve, solve_ground_state, solve_symmetric};
use miw_core::rates::{fit_rate, Correction};
use miw_core::stein::{tau_discrete, wasserstein_bound, TiltedGaussianTarget};
use miw_core::wasser::{spherical_combine, w1_empirical_vs_cdf};
use miw_core::{BiasTransform64, BoundReport64, MiwConfiguration64, MiwError, RadialSolution64};

const VERSION: &str = env!("CARGO_PKG_VERSION");
const DEFAULT_MAX_N: usize = 20_000;

/// Many-interacting-worlds discretizations: solve, build, bound, measure and fit.
#[derive(Parser)]
#[command(name = "miw", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the signed radial recursion for one (k, N).
    Radial {
        #[command(flatten)]
        sys: System,
        /// Replace the discrete kernel by the continuum Stein kernel.
        #[arg(long)]
        kernel_matched: bool,
        #[command(flatten)]
        io: Output,
    },
    /// Discrete and continuum Stein kernels at the recursion points.
    Kernel {
        #[command(flatten)]
        sys: System,
        #[command(flatten)]
        io: Output,
    },
    /// Stein-kernel bound on the distance to the tilted Gaussian, per N.
    Bound {
        #[command(flatten)]
        sweep: Sweep,
        /// Also measure the exact distance and check dominance.
        #[arg(long)]
        exact: bool,
        /// Append the coupling bound and the first inverse-moment gap.
        #[arg(long)]
        coupling: bool,
        #[command(flatten)]
        io: Output,
    },
    /// Exact Wasserstein-1 distance in one dimension, or the spherical bound
    /// for a d-dimensional ground state.
    Wasserstein {
        #[command(flatten)]
        sweep: Sweep,
        #[arg(long)]
        d: Option<usize>,
        #[command(flatten)]
        io: Output,
    },
    /// Build a d-dimensional configuration and list its points.
    Config {
        #[arg(long)]
        d: usize,
        #[arg(long)]
        n: usize,
        /// Comma-separated quantum numbers, e.g. 1,0,0 (default: ground state).
        #[arg(long)]
        quanta: Option<String>,
        #[command(flatten)]
        io: Output,
    },
    /// Log-log rate fit of a quantity over an N grid.
    Rates {
        #[arg(long, default_value_t = 0)]
        k: u32,
        #[arg(long)]
        n_grid: Grid,
        #[arg(long, default_value = "none", value_parser = parse_correction)]
        correction: Correction,
        #[arg(long, value_enum, default_value_t = Quantity::W1)]
        quantity: Quantity,
        #[command(flatten)]
        io: Output,
    },
    /// Bias-transform coupling quantities per N.
    Coupling {
        #[command(flatten)]
        sweep: Sweep,
        /// Order of the inverse moment.
        #[arg(long, default_value_t = 1)]
        l: u32,
        #[command(flatten)]
        io: Output,
    },
}

#[derive(Args, Clone)]
struct System {
    #[arg(long, default_value_t = 0)]
    k: u32,
    #[arg(long)]
    n: usize,
}

#[derive(Args, Clone)]
struct Sweep {
    #[arg(long, default_value_t = 0)]
    k: u32,
    /// Single N; exclusive with --n-grid.
    #[arg(long, conflicts_with = "n_grid", required_unless_present = "n_grid")]
    n: Option<usize>,
    /// Inclusive sweep start:stop:step.
    #[arg(long)]
    n_grid: Option<Grid>,
}

impl Sweep {
    fn points(&self) -> Vec<usize> {
        match (&self.n_grid, self.n) {
            (Some(g), _) => g.values(),
            (None, Some(n)) => vec![n],
            (None, None) => Vec::new(),
        }
    }

    fn flags(&self) -> String {
        format!("--k {} {}", self.k, self.n_flags())
    }

    fn n_flags(&self) -> String {
        match (&self.n_grid, self.n) {
            (Some(g), _) => format!("--n-grid {g}"),
            (None, Some(n)) => format!("--n {n}"),
            (None, None) => String::new(),
        }
    }
}

/// Options shared by every subcommand. `--out` and `--jobs` never change the
/// bytes written, so they stay out of the provenance line.
#[derive(Args, Clone)]
struct Output {
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Worker threads for sweeps (default: available parallelism).
    #[arg(long)]
    jobs: Option<usize>,
    /// Bracketing tolerance of the radial solver.
    #[arg(long, default_value_t = miw_core::radial::DEFAULT_TOL)]
    tol: f64,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Quantity {
    /// Exact Wasserstein-1 distance of the ground state.
    W1,
    /// Stein-kernel bound total.
    Bound,
    /// Smallest positive point x_m.
    Median,
}

impl Quantity {
    fn as_str(self) -> &'static str {
        match self {
            Quantity::W1 => "w1",
            Quantity::Bound => "bound",
            Quantity::Median => "median",
        }
    }
}

/// Inclusive `start:stop:step`; `step ≥ 1`, `start ≤ stop`.
#[derive(Clone, Copy, Debug)]
struct Grid {
    start: usize,
    stop: usize,
    step: usize,
}

impl Grid {
    fn values(&self) -> Vec<usize> {
        (self.start..=self.stop).step_by(self.step).collect()
    }
}

impl std::fmt::Display for Grid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}:{}:{}", self.start, self.stop, self.step)
    }
}

impl FromStr for Grid {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let parts: Vec<&str> = s.split(':').collect();
        let [a, b, c] = parts.as_slice() else {
            return Err(format!("expected start:stop:step, got '{s}'"));
        };
        let num = |t: &str| {
            t.trim()
                .parse::<usize>()
                .map_err(|e| format!("bad grid component '{t}': {e}"))
        };
        let g = Grid {
            start: num(a)?,
            stop: num(b)?,
            step: num(c)?,
        };
        if g.step == 0 || g.start > g.stop {
            return Err(format!("grid '{s}' is empty or has zero step"));
        }
        Ok(g)
    }
}

fn parse_correction(s: &str) -> Result<Correction, String> {
    Correction::from_str(s).map_err(|e| e.to_string())
}

enum CliError {
    Miw(MiwError),
    Usage(String),
    Io(std::io::Error),
}

impl From<MiwError> for CliError {
    fn from(e: MiwError) -> Self {
        CliError::Miw(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e)
    }
}

type CliResult<T> = Result<T, CliError>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Miw(e)) => {
            eprintln!("miw: {e}");
            ExitCode::from(if e.is_domain() { 2 } else { 3 })
        }
        Err(CliError::Usage(msg)) => {
            eprintln!("miw: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Io(e)) => {
            eprintln!("miw: {e}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Radial {
            sys,
            kernel_matched,
            io,
        } => cmd_radial(&sys, kernel_matched, &io),
        Command::Kernel { sys, io } => cmd_kernel(&sys, &io),
        Command::Bound {
            sweep,
            exact,
            coupling,
            io,
        } => cmd_bound(&sweep, exact, coupling, &io),
        Command::Wasserstein { sweep, d, io } => cmd_wasserstein(&sweep, d, &io),
        Command::Config { d, n, quanta, io } => cmd_config(d, n, quanta.as_deref(), &io),
        Command::Rates {
            k,
            n_grid,
            correction,
            quantity,
            io,
        } => cmd_rates(k, n_grid, correction, quantity, &io),
        Command::Coupling { sweep, l, io } => cmd_coupling(&sweep, l, &io),
    }
}

// ---------------------------------------------------------------------------
// Plumbing
// ---------------------------------------------------------------------------

fn max_n() -> CliResult<usize> {
    match std::env::var("MIW_MAX_N") {
        Ok(v) => v.trim().parse().map_err(|_| {
            CliError::Usage(format!("MIW_MAX_N must be a positive integer, got '{v}'"))
        }),
        Err(_) => Ok(DEFAULT_MAX_N),
    }
}

fn check_cap(ns: &[usize]) -> CliResult<()> {
    let cap = max_n()?;
    match ns.iter().find(|&&n| n > cap) {
        Some(n) => {
            Err(MiwError::Domain(format!("N = {n} exceeds the cap {cap} (set MIW_MAX_N)")).into())
        }
        None => Ok(()),
    }
}

fn provenance(sub: &str, flags: &str, io: &Output, format: Format) -> String {
    let fmt = match format {
        Format::Csv => "csv",
        Format::Json => "json",
    };
    format!(
        "# miw {VERSION} {sub} {flags} --tol {} --format {fmt}\n",
        io.tol
    )
}

fn emit(io: &Output, body: &str) -> CliResult<()> {
    match &io.out {
        Some(path) => std::fs::write(path, body)?,
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            lock.write_all(body.as_bytes())?;
            lock.flush()?;
        }
    }
    Ok(())
}

/// Evaluate `f` at every N on a pool of `jobs` threads; results keep grid order
/// and the first failure in grid order wins.
fn sweep_map<R, F>(ns: &[usize], jobs: Option<usize>, f: F) -> CliResult<Vec<R>>
where
    R: Send,
    F: Fn(usize) -> Result<R, MiwError> + Sync + Send,
{
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(j) = jobs {
        if j == 0 {
            return Err(CliError::Usage("--jobs must be at least 1".into()));
        }
        builder = builder.num_threads(j);
    }
    let pool = builder
        .build()
        .map_err(|e| CliError::Usage(format!("cannot start worker pool: {e}")))?;
    let results: Vec<Result<R, MiwError>> = pool.install(|| ns.par_iter().map(|&n| f(n)).collect());
    results
        .into_iter()
        .collect::<Result<Vec<R>, MiwError>>()
        .map_err(CliError::from)
}

fn json_value(s: Result<String, MiwError>) -> CliResult<Value> {
    serde_json::from_str(&s?).map_err(|e| CliError::Miw(MiwError::Domain(e.to_string())))
}

fn json_text(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("values serialise");
    s.push('\n');
    s
}

fn opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

fn solve(k: u32, n: usize, tol: f64) -> Result<RadialSolution64, MiwError> {
    solve_ground_state(k, n, tol)
}

// ---------------------------------------------------------------------------
// Subcommands
// ---------------------------------------------------------------------------

fn cmd_radial(sys: &System, kernel_matched: bool, io: &Output) -> CliResult<()> {
    check_cap(&[sys.n])?;
    let format = io.format.unwrap_or(Format::Csv);
    let sol: RadialSolution64 = if kernel_matched {
        kernel_matched_solve(sys.k, sys.n, io.tol)?
    } else if sys.n % 2 == 1 {
        solve_symmetric(sys.k, sys.n, io.tol)?
    } else {
        solve(sys.k, sys.n, io.tol)?
    };
    let flags = format!(
        "--k {} --n {}{}",
        sys.k,
        sys.n,
        if kernel_matched {
            " --kernel-matched"
        } else {
            ""
        }
    );
    let body = match format {
        Format::Csv => provenance("radial", &flags, io, format) + &sol.to_csv(),
        Format::Json => {
            let mut s = sol.to_json()?;
            s.push('\n');
            s
        }
    };
    emit(io, &body)
}

fn cmd_kernel(sys: &System, io: &Output) -> CliResult<()> {
    check_cap(&[sys.n])?;
    let format = io.format.unwrap_or(Format::Csv);
    let sol = solve(sys.k, sys.n, io.tol)?;
    let target = TiltedGaussianTarget::<f64>::new(sys.k)?;
    let tau_n = tau_discrete(&sol);
    let mut rows = Vec::with_capacity(sol.points.len());
    for (i, (&x, &tn)) in sol.points.iter().zip(&tau_n).enumerate() {
        let ti = target.stein_kernel(x)?;
        rows.push((i + 1, x, tn, ti, (ti - tn).abs()));
    }
    let flags = format!("--k {} --n {}", sys.k, sys.n);
    let body = match format {
        Format::Csv => {
            let mut s = provenance("kernel", &flags, io, format);
            s.push_str("i,x,tau_n,tau_inf,abs_diff\n");
            for (i, x, tn, ti, d) in rows {
                let _ = writeln!(s, "{i},{x},{tn},{ti},{d}");
            }
            s
        }
        Format::Json => json_text(&serde_json::json!({
            "k": sys.k,
            "N": sys.n,
            "rows": rows.iter().map(|&(i, x, tn, ti, d)| serde_json::json!({
                "i": i, "x": x, "tau_n": tn, "tau_inf": ti, "abs_diff": d
            })).collect::<Vec<_>>(),
        })),
    };
    emit(io, &body)
}

fn cmd_bound(sweep: &Sweep, exact: bool, coupling: bool, io: &Output) -> CliResult<()> {
    let ns = sweep.points();
    check_cap(&ns)?;
    let format = io.format.unwrap_or(Format::Csv);
    let k = sweep.k;
    let tol = io.tol;
    let reports: Vec<BoundReport64> = sweep_map(&ns, io.jobs, |n| {
        let sol = solve(k, n, tol)?;
        let target = TiltedGaussianTarget::new(k)?;
        let mut rep = wasserstein_bound(&sol, &target)?;
        if exact {
            rep.exact_w1 = Some(w1_empirical_vs_cdf(&sol.points, &target)?);
        }
        if coupling {
            attach_coupling(&mut rep, &BiasTransform::new(sol)?)?;
        }
        Ok(rep)
    })?;
    let mut flags = sweep.flags();
    if exact {
        flags.push_str(" --exact");
    }
    if coupling {
        flags.push_str(" --coupling");
    }
    let body = match format {
        Format::Csv => {
            let mut s = provenance("bound", &flags, io, format);
            s.push_str(BoundReport64::CSV_HEADER);
            s.push_str(",dominance\n");
            for r in &reports {
                let dom = r.dominance().map(|b| b.to_string()).unwrap_or_default();
                let _ = writeln!(s, "{},{dom}", r.to_csv_row());
            }
            s
        }
        Format::Json => {
            let mut arr = Vec::with_capacity(reports.len());
            for r in &reports {
                let mut v = json_value(r.to_json())?;
                v["dominance"] = serde_json::json!(r.dominance());
                arr.push(v);
            }
            json_text(&Value::Array(arr))
        }
    };
    emit(io, &body)
}

fn cmd_wasserstein(sweep: &Sweep, d: Option<usize>, io: &Output) -> CliResult<()> {
    let ns = sweep.points();
    check_cap(&ns)?;
    let format = io.format.unwrap_or(Format::Csv);
    let k = sweep.k;
    let tol = io.tol;
    match d {
        None | Some(1) => {
            let ws: Vec<f64> = sweep_map(&ns, io.jobs, |n| {
                let sol = solve(k, n, tol)?;
                w1_empirical_vs_cdf(&sol.points, &TiltedGaussianTarget::new(k)?)
            })?;
            let body = match format {
                Format::Csv => {
                    let mut s = provenance("wasserstein", &sweep.flags(), io, format);
                    s.push_str("k,N,w1\n");
                    for (n, w) in ns.iter().zip(&ws) {
                        let _ = writeln!(s, "{k},{n},{w}");
                    }
                    s
                }
                Format::Json => json_text(&Value::Array(
                    ns.iter()
                        .zip(&ws)
                        .map(|(n, w)| serde_json::json!({"k": k, "N": n, "w1": w}))
                        .collect(),
                )),
            };
            emit(io, &body)
        }
        Some(d) => {
            // The radial law of a d-dimensional state fixes k = d - 1.
            let rows = sweep_map(&ns, io.jobs, |n| {
                let cfg: MiwConfiguration64 = build_ground_state(n, d)?;
                let md = marginal_distances(&cfg)?;
                let bound = spherical_combine(&md, d)?;
                Ok((md, bound))
            })?;
            let flags = format!("--d {d} {}", sweep.n_flags());
            let body = match format {
                Format::Csv => {
                    let mut s = provenance("wasserstein", &flags, io, format);
                    s.push_str("d,N,radial,polar,azimuthal,m_mu,m_nu,bound\n");
                    for (n, (md, b)) in ns.iter().zip(&rows) {
                        let polar: Vec<String> = md.polar.iter().map(|p| p.to_string()).collect();
                        let _ = writeln!(
                            s,
                            "{d},{n},{},{},{},{},{},{b}",
                            md.radial,
                            polar.join(";"),
                            opt(md.azimuthal),
                            md.m_mu,
                            md.m_nu
                        );
                    }
                    s
                }
                Format::Json => json_text(&Value::Array(
                    ns.iter()
                        .zip(&rows)
                        .map(|(n, (md, b))| {
                            serde_json::json!({
                                "d": d, "N": n, "radial": md.radial, "polar": md.polar,
                                "azimuthal": md.azimuthal, "m_mu": md.m_mu, "m_nu": md.m_nu,
                                "bound": b,
                            })
                        })
                        .collect(),
                )),
            };
            emit(io, &body)
        }
    }
}

fn parse_quanta(s: &str) -> CliResult<Vec<u8>> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<u8>()
                .map_err(|e| CliError::Usage(format!("bad quantum number '{t}': {e}")))
        })
        .collect()
}

fn cmd_config(d: usize, n: usize, quanta: Option<&str>, io: &Output) -> CliResult<()> {
    check_cap(&[n])?;
    let format = io.format.unwrap_or(Format::Csv);
    // Validate the plan first so infeasible requests fail before solving.
    optimize_counts(n, d)?;
    let cfg: MiwConfiguration64 = match quanta {
        Some(q) => build_excited_state(n, d, &parse_quanta(q)?)?,
        None => build_ground_state(n, d)?,
    };
    let mut flags = format!("--d {d} --n {n}");
    if let Some(q) = quanta {
        let _ = write!(flags, " --quanta {}", q.replace(' ', ""));
    }
    let body = match format {
        Format::Csv => provenance("config", &flags, io, format) + &cfg.to_csv(),
        Format::Json => {
            let mut s = cfg.to_json()?;
            s.push('\n');
            s
        }
    };
    emit(io, &body)
}

fn cmd_rates(
    k: u32,
    grid: Grid,
    correction: Correction,
    quantity: Quantity,
    io: &Output,
) -> CliResult<()> {
    let ns = grid.values();
    check_cap(&ns)?;
    let format = io.format.unwrap_or(Format::Json);
    let tol = io.tol;
    let values = sweep_map(&ns, io.jobs, |n| {
        let sol = solve(k, n, tol)?;
        match quantity {
            Quantity::W1 => w1_empirical_vs_cdf(&sol.points, &TiltedGaussianTarget::new(k)?),
            Quantity::Bound => {
                Ok(wasserstein_bound(&sol, &TiltedGaussianTarget::new(k)?)?.total_bound)
            }
            Quantity::Median => Ok(sol.x_median()),
        }
    })?;
    let pairs: Vec<(usize, f64)> = ns.iter().copied().zip(values).collect();
    let fit = fit_rate(&pairs, correction)?;
    let flags = format!(
        "--k {k} --n-grid {grid} --correction {correction} --quantity {}",
        quantity.as_str()
    );
    let body = match format {
        Format::Json => {
            let mut v = serde_json::to_value(&fit)
                .map_err(|e| CliError::Miw(MiwError::Domain(e.to_string())))?;
            v["k"] = serde_json::json!(k);
            v["quantity"] = serde_json::json!(quantity.as_str());
            json_text(&v)
        }
        Format::Csv => {
            let mut s = provenance("rates", &flags, io, format);
            let _ = writeln!(
                s,
                "# exponent={} intercept={} r_squared={}",
                fit.exponent, fit.intercept, fit.r_squared
            );
            s.push_str("N,value,residual\n");
            for ((n, v), r) in fit.n_grid.iter().zip(&fit.values).zip(&fit.residuals) {
                let _ = writeln!(s, "{n},{v},{r}");
            }
            s
        }
    };
    emit(io, &body)
}

struct CouplingRow {
    n: usize,
    gap: f64,
    gap_envelope: f64,
    inverse: Option<(f64, f64)>,
    bound: Option<(f64, &'static str, bool)>,
}

fn coupling_row(bt: &BiasTransform64, l: u32) -> Result<CouplingRow, MiwError> {
    let k = bt.k();
    let gap = coupled_gap_bound(bt)?;
    let inverse = if l >= 1 && l <= k {
        let g = inverse_moment_gap(bt, l)?;
        Some((g.exact + g.abs_error, g.envelope()))
    } else if l > k && k > 0 {
        return Err(MiwError::Domain(format!(
            "inverse moment order l = {l} exceeds k = {k}"
        )));
    } else {
        None
    };
    // No coupling form exists for the Gaussian itself.
    let bound = if k == 0 {
        None
    } else {
        let c = coupling_wasserstein_bound(bt)?;
        let form = match c.form {
            miw_core::coupling::CouplingForm::RayleighChain => "rayleigh_chain",
            miw_core::coupling::CouplingForm::Corollary => "corollary",
            miw_core::coupling::CouplingForm::Theorem => "theorem",
        };
        Some((c.value, form, c.beyond_verified_range))
    };
    Ok(CouplingRow {
        n: bt.n_points(),
        gap: gap.exact + gap.abs_error,
        gap_envelope: gap.envelope,
        inverse,
        bound,
    })
}

fn cmd_coupling(sweep: &Sweep, l: u32, io: &Output) -> CliResult<()> {
    let ns = sweep.points();
    check_cap(&ns)?;
    let format = io.format.unwrap_or(Format::Csv);
    let k = sweep.k;
    let tol = io.tol;
    let rows = sweep_map(&ns, io.jobs, |n| {
        coupling_row(&BiasTransform::new(solve(k, n, tol)?)?, l)
    })?;
    let flags = format!("{} --l {l}", sweep.flags());
    let body = match format {
        Format::Csv => {
            let mut s = provenance("coupling", &flags, io, format);
            s.push_str(
                "k,N,gap,gap_envelope,inverse_moment,inverse_moment_envelope,coupling_bound,form,beyond_verified_range\n",
            );
            for r in &rows {
                let _ = writeln!(
                    s,
                    "{k},{},{},{},{},{},{},{},{}",
                    r.n,
                    r.gap,
                    r.gap_envelope,
                    opt(r.inverse.map(|p| p.0)),
                    opt(r.inverse.map(|p| p.1)),
                    opt(r.bound.map(|b| b.0)),
                    r.bound.map(|b| b.1).unwrap_or_default(),
                    r.bound.map(|b| b.2.to_string()).unwrap_or_default(),
                );
            }
            s
        }
        Format::Json => json_text(&Value::Array(
            rows.iter()
                .map(|r| {
                    serde_json::json!({
                        "k": k, "N": r.n, "l": l,
                        "gap": r.gap, "gap_envelope": r.gap_envelope,
                        "inverse_moment": r.inverse.map(|p| p.0),
                        "inverse_moment_envelope": r.inverse.map(|p| p.1),
                        "coupling_bound": r.bound.map(|b| b.0),
                        "form": r.bound.map(|b| b.1),
                        "beyond_verified_range": r.bound.map(|b| b.2),
                    })
                })
                .collect(),
        )),
    };
    emit(io, &body)
}
