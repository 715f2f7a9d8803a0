use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("instance too small: n={n} gives no complete block at alpha={alpha}; need n >= {min_n}")]
    InstanceTooSmall { n: usize, alpha: f64, min_n: usize },

    #[error("threshold calibration failed: margin {margin} is not positive")]
    Calibration { margin: f64 },

    #[error("verdicts do not form a disjoint union of cliques ({violations} violated pairs)")]
    NotCliquePartition { violations: usize },

    #[error("insufficient traces: need at least {needed}, got {got}")]
    InsufficientTraces { needed: usize, got: usize },

    #[error("reconstruction failed: {0}")]
    ReconstructionFailed(String),

    #[error("no string reached the majority threshold ({best} of {runs} runs agreed)")]
    NoMajority { best: usize, runs: usize },

    #[error("distribution is empty")]
    EmptyDistribution,

    #[error("no cluster reached the large-cluster threshold {threshold}")]
    AllClustersSmall { threshold: f64 },

    #[error("trace budget {requested} exceeds cap {cap}")]
    BudgetExceeded { requested: f64, cap: usize },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("io error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
