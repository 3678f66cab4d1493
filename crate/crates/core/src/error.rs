use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("interval [{0}, {1}] is shorter than the window support width {2}")]
    IntervalTooShort(f64, f64, f64),

    #[error("interval [{0}, {1}] is empty")]
    EmptyInterval(f64, f64),

    #[error("k_range {given} misses overlapping translates; need at least {needed}")]
    KRangeTooSmall { given: usize, needed: usize },

    #[error("grid step {0} must be positive and divide 1/2 evenly")]
    BadGridStep(f64),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("matrix contains non-finite entries")]
    NonFinite,

    #[error("sampling group k={0} is not strictly increasing or leaves [k/2, (k+1)/2]")]
    MalformedGroup(i64),

    #[error("zero reference signal on the evaluation grid")]
    ZeroReference,

    #[error("FFT size {0} is not a power of two")]
    FftSize(usize),

    #[error("evaluation at t = {t} is outside the domain t < {t0}")]
    Domain { t: f64, t0: f64 },

    #[error("adaptive-weights iteration diverged after {iterations} steps (residual {residual:e})")]
    Diverged { iterations: usize, residual: f64 },

    #[error("unknown preset '{0}'")]
    UnknownPreset(String),

    #[error("i/o: {0}")]
    Io(String),

    #[error("config: {0}")]
    Config(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Config(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
