use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors raised by model validation, quadrature, operators and solvers.
///
/// Divergence of a recursion is usually *not* an error: operators and solvers
/// report it through flags on their results. The `Divergence` variant is only
/// used where a caller asked for a finite number and none exists.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("non-stationary parameters: {0}")]
    NonStationary(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("divergence: {0}")]
    Divergence(String),

    #[error("no convergence after {iterations} iterations (last change {last_change:.3e}): {context}")]
    NonConvergence {
        context: String,
        iterations: usize,
        last_change: f64,
    },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("linear algebra failure: {0}")]
    Linalg(String),

    #[error("internal consistency check failed: {0}")]
    Consistency(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
