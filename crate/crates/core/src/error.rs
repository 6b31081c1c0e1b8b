use thiserror::Error;

/// Errors produced by the synthesis pipeline.
///
/// Variants are grouped by who is at fault: malformed input, a mathematical
/// non-existence condition, or a numerical/internal consistency failure.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    Dimension { context: &'static str, expected: String, actual: String },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("{0} must be symmetric positive definite")]
    NotPositiveDefinite(String),

    #[error("{0} not stabilizable")]
    NotStabilizable(String),

    #[error("functional ell not estimable: dual DAE has no solution on [0, inf) (F^T ell outside the consistency space, residual {residual:.3e})")]
    NotEstimable { residual: f64 },

    #[error("initial state inconsistent with the DAE (E x0 outside the consistency space, residual {residual:.3e})")]
    Inconsistent { residual: f64 },

    #[error("internal consistency check failed: {0}")]
    Internal(String),
}

impl Error {
    pub(crate) fn dim(context: &'static str, expected: impl ToString, actual: impl ToString) -> Self {
        Error::Dimension { context, expected: expected.to_string(), actual: actual.to_string() }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
