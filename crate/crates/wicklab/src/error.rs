use thiserror::Error;

/// Errors shared across the step-function layer, the symbolic algebra and
/// the Monte Carlo drivers.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum WickError {
    #[error("invalid interval ({lo}, {hi}]: requires 0 <= lo < hi")]
    InvalidInterval { lo: f64, hi: f64 },
    #[error("invalid grid or partition: {0}")]
    InvalidGrid(&'static str),
    #[error("non-finite number {0} in input")]
    NonFinite(f64),
    #[error("horizon {horizon} does not cover a support ending at {support_end}")]
    HorizonTooSmall { horizon: f64, support_end: f64 },
    #[error("step function is not resolved on the grid")]
    NotResolved,
    #[error("operands live on different grids")]
    GridMismatch,
    #[error("result degree {degree} exceeds the polynomial budget {cap}")]
    BudgetExceeded { degree: u32, cap: u32 },
    #[error("t = {0} is not a grid point")]
    NotAGridPoint(f64),
    #[error("integrand factor is not adapted before the cell ({lo}, {hi}]")]
    NotAdapted { lo: f64, hi: f64 },
    #[error("functional declared {declared} reads increments outside its window at t = {t}")]
    FunctionalTypeViolated { declared: &'static str, t: f64 },
    #[error("partition points are not grid times")]
    PartitionNotOnGrid,
    #[error("empty process sequence")]
    EmptySequence,
    #[error("empty sample vector")]
    EmptySamples,
    #[error("exponent p = {p} out of range ({requires})")]
    ExponentOutOfRange { p: f64, requires: &'static str },
    #[error("need at least {min} refinement levels, got {got}")]
    TooFewLevels { min: usize, got: usize },
    #[error("an ensemble needs at least one path")]
    ZeroPaths,
    #[error("unknown scenario id `{0}`")]
    UnknownScenario(String),
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, WickError>;
