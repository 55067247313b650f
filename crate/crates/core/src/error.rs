use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("singular point: {0}")]
    Singular(String),

    #[error("insufficient resolution: {found} nodes in ball, at least {required} required")]
    InsufficientResolution { found: usize, required: usize },

    #[error("insufficient scales: {0}")]
    InsufficientScales(String),

    #[error("field vanishes identically on the ball")]
    DegenerateZero,

    #[error("solver did not converge after {iterations} iterations (last residual {residual:.3e})")]
    SolverFailure { iterations: usize, residual: f64 },

    #[error("numerical breakdown: {0}")]
    NumericalBreakdown(String),

    #[error("linear solve failed: {0}")]
    LinearSolve(String),

    #[error("invalid parameters: {0}")]
    Parameter(String),

    #[error("inconsistent data: relative residual {residual:.3e} exceeds {threshold:.3e}")]
    Inconsistency { residual: f64, threshold: f64 },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("malformed field dump {path}: {reason}")]
    Format { path: PathBuf, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
