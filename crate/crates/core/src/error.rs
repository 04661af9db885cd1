use thiserror::Error;

/// Errors raised by the fitting, sampling and I/O layers.
#[derive(Debug, Error)]
pub enum FplmError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("degenerate spline design: {0}")]
    DegenerateDesign(String),
    #[error("rank deficient design: {0}")]
    RankDeficient(String),
    #[error("sampler failure: {0}")]
    Sampler(String),
    #[error("chain too short: need at least {needed} draws, got {got}")]
    ChainTooShort { needed: usize, got: usize },
    #[error("marginal likelihood: {0}")]
    MarginalLikelihood(String),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, FplmError>;
