use thiserror::Error;

/// Errors raised by the library. The CLI maps the variants onto exit codes.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("index out of range: [{j}, {jp}] not within [1, {len}]")]
    IndexOutOfRange { j: usize, jp: usize, len: usize },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("budget exceeded: {what} (limit {limit}, requested {requested})")]
    BudgetExceeded {
        what: &'static str,
        limit: usize,
        requested: usize,
    },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid configuration field `{field}`: {reason}")]
    Config { field: String, reason: String },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("singular system: {0}")]
    Singular(String),

    #[error("zero energy denominator at slot {slot}")]
    ZeroDenominator { slot: usize },

    #[error("series does not converge: {0}")]
    NonConvergent(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn config(field: &str, reason: impl Into<String>) -> Self {
        Error::Config {
            field: field.to_string(),
            reason: reason.into(),
        }
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
