use thiserror::Error;

/// Library-wide error type.
///
/// Numerical soundness failures (small divisors, blown budgets) are ordinary
/// errors here, not panics: callers decide whether to retry with different
/// truncation parameters.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("small divisor: |k.omega| = {value:.6e} below floor {floor:.6e} at k = {k:?}")]
    SmallDivisor {
        k: Vec<i32>,
        value: f64,
        floor: f64,
    },

    #[error("resource budget exceeded: {0}")]
    BudgetExceeded(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("orbit left the declared real domain at t = {time}")]
    DomainExit { time: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    pub fn dims(msg: impl Into<String>) -> Self {
        Error::DimensionMismatch(msg.into())
    }

    pub fn budget(msg: impl Into<String>) -> Self {
        Error::BudgetExceeded(msg.into())
    }
}
