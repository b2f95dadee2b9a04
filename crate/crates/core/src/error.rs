use thiserror::Error;

/// Errors raised by the numerical toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid profile: {0}")]
    InvalidProfile(String),

    #[error("invalid domain specification: {0}")]
    InvalidSpec(String),

    #[error("geometry error: {0}")]
    Geometry(String),

    #[error("mesh too coarse: {reason} (use target_h <= {required:.3e})")]
    TooCoarse { reason: String, required: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("singular linearization: {0}")]
    Singular(String),

    #[error("linear solver failure: {0}")]
    LinearSolver(String),

    #[error("solver did not converge after {iterations} iterations (last residual {last_residual:.3e})")]
    NonConvergence {
        iterations: usize,
        last_residual: f64,
        residual_history: Vec<f64>,
        last_iterate: Vec<f64>,
    },

    #[error("undefined quantity: {0}")]
    Undefined(String),

    #[error("invalid option: {0}")]
    InvalidOption(String),
}

pub type Result<T> = std::result::Result<T, Error>;
