use thiserror::Error;

/// Errors raised by the compression, filtering and model layers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("every weight is zero (all log-weights are -inf)")]
    AllWeightsZero,
    #[error("empty input: at least one sample is required")]
    Empty,
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("invalid region count {requested}: {reason}")]
    InvalidRegionCount { requested: usize, reason: &'static str },
    #[error("operation not valid for a function-specific summary")]
    ProvenanceMismatch,
    #[error("covariance of region {region} is not symmetric positive definite")]
    CovarianceNotSpd { region: usize },
    #[error("N = {n} is not a multiple of M = {m}")]
    DivisibilityViolation { n: usize, m: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("orbital period must be positive, got {0}")]
    NonpositivePeriod(f64),
    #[error("eccentricity {0} outside [0, 1)")]
    EccentricityOutOfRange(f64),
    #[error("state violates the parameter constraints")]
    ConstraintViolation,
    #[error("moment order {0} outside 1..=5")]
    MomentOrder(usize),
    #[error("unknown target '{0}'")]
    UnknownTarget(String),
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
        Error::Parse { line, message: e.to_string() }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
