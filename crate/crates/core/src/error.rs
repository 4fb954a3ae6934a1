use thiserror::Error;

/// Errors raised by the library.
///
/// Variants split into two families: domain errors (bad input, infeasible
/// request) and numerical failures (an iteration that did not settle).
#[derive(Debug, Clone, PartialEq, Error)]
pub enum MiwError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("target {target} not bracketed by [{lo}, {hi}] (f(lo) = {f_lo}, f(hi) = {f_hi})")]
    Bracket {
        lo: f64,
        hi: f64,
        f_lo: f64,
        f_hi: f64,
        target: f64,
    },
    #[error("iteration limit of {limit} reached in {context}")]
    IterationLimit { context: &'static str, limit: usize },
    #[error("recursion denominator vanished after {index} points")]
    SingularSum { index: usize },
    #[error("point {index} is exactly zero; the tilted recursion is singular there")]
    ZeroPoint { index: usize },
    #[error("no shot value in [{lo}, {hi}] changes the sign of the median residual")]
    NonBracketing { lo: f64, hi: f64 },
    #[error("iterate left [-x1, x1] at step {step} (shot value too small)")]
    Divergence { step: usize },
    #[error("mismatched tilt exponent: solution has k = {solution}, target has k = {target}")]
    MismatchedK { solution: u32, target: u32 },
    #[error("infeasible count plan: {0}")]
    Infeasible(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("empty input")]
    EmptyInput,
    #[error("cdf is not monotone near x = {at}")]
    NonMonotone { at: f64 },
    #[error("unsupported tilt exponent k = {0}")]
    UnsupportedK(u32),
    #[error("unsupported quanta {0:?}: supply angular cdfs explicitly")]
    UnsupportedQuanta(Vec<u8>),
    #[error("value {value} outside [0, {period})")]
    OutOfRange { value: f64, period: f64 },
    #[error("overflow: {0}")]
    Overflow(String),
    #[error("direction ({shell}, {direction}) has fewer than two points")]
    DegenerateDirection { shell: usize, direction: usize },
    #[error("zero radius in direction ({shell}, {direction})")]
    ZeroRadius { shell: usize, direction: usize },
    #[error("degenerate input: {0}")]
    Degenerate(String),
}

impl MiwError {
    /// True for errors caused by the request itself rather than by a
    /// numerical procedure failing to converge.
    pub fn is_domain(&self) -> bool {
        !matches!(
            self,
            MiwError::IterationLimit { .. }
                | MiwError::SingularSum { .. }
                | MiwError::NonBracketing { .. }
                | MiwError::Divergence { .. }
                | MiwError::Overflow(_)
                | MiwError::NonMonotone { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, MiwError>;
