use thiserror::Error;

/// Library-wide error type.
///
/// Numerical non-convergence is deliberately *not* an error: solvers return
/// reports with a `converged` flag so callers can inspect partial results.
/// Errors are reserved for conditions that make the requested computation
/// meaningless (invalid parameters, malformed files, I/O failures).
#[derive(Debug, Error)]
pub enum Error {
    /// A precondition on parameters or geometry is violated.
    #[error("validation: {0}")]
    Validation(String),

    /// A driver stage depended on a solve that did not converge. Solvers
    /// themselves never raise this; drivers do when a partial result would
    /// poison everything downstream.
    #[error("solver: {0}")]
    Solver(String),

    /// A file has the wrong magic, layout, or non-finite payload.
    #[error("format: {0}")]
    Format(String),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

/// Shorthand used throughout: `return fail!("msg {x}")`.
macro_rules! validation {
    ($($arg:tt)*) => {
        crate::error::Error::Validation(format!($($arg)*))
    };
}
pub(crate) use validation;
