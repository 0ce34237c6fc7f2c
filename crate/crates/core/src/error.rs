use thiserror::Error;

/// Errors raised by the toolkit.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("quadrature did not converge: {0}")]
    QuadratureNonConvergence(String),

    #[error("unsupported spatial dimension N = {0} for this operation")]
    UnsupportedDimension(usize),

    #[error("argument u = {u:e} is outside the profile validity range (limit {limit:e})")]
    OutsideProfileRange { u: f64, limit: f64 },

    #[error("kernel is not differentiable in t at t = 0")]
    NotDifferentiable,

    #[error("linear program is infeasible")]
    Infeasible,

    #[error("linear program is unbounded")]
    Unbounded,

    #[error("problem too large: {0}")]
    TooLarge(String),

    #[error("iteration did not converge within {0} steps")]
    NoConvergence(usize),

    #[error("parse error at line {line}: {reason}")]
    Parse { line: usize, reason: String },

    #[error("i/o error: {0}")]
    Io(String),

    #[error("{0}")]
    Internal(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
