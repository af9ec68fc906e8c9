use thiserror::Error;

/// Errors raised by the estimators, tuning procedures and experiment harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("rank deficient {what}: condition number {condition:.3e}")]
    RankDeficient { what: String, condition: f64 },

    #[error("degenerate sample: {0}")]
    DegenerateSample(String),

    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    #[error("tuning failed: {0}")]
    Tuning(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
