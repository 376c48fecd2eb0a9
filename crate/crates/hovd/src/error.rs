use thiserror::Error;
use ttpeel_core::CoreError;

#[derive(Debug, Error)]
pub enum HovdError {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("Newton iteration did not converge after {iterations} steps (residual {residual:.3e})")]
    Newton { iterations: usize, residual: f64 },

    #[error("state Jacobian factorization failed: {0}")]
    Singular(String),

    #[error(transparent)]
    Core(#[from] CoreError),
}

impl From<HovdError> for CoreError {
    fn from(e: HovdError) -> Self {
        match e {
            HovdError::Core(c) => c,
            HovdError::Config(s) => CoreError::Config(s),
            HovdError::ShapeMismatch(s) => CoreError::ShapeMismatch(s),
            other => CoreError::Oracle(other.to_string()),
        }
    }
}

pub type Result<T, E = HovdError> = std::result::Result<T, E>;
