use thiserror::Error;
use ttpeel_core::CoreError;
use ttpeel_hovd::HovdError;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    /// 2 for configuration and i/o problems, 3 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Io(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        let msg = e.to_string();
        match e.root() {
            CoreError::InvalidShape(_)
            | CoreError::ShapeMismatch(_)
            | CoreError::Capacity { .. }
            | CoreError::Parse { .. }
            | CoreError::UnsupportedVersion { .. }
            | CoreError::Config(_) => CliError::Config(msg),
            CoreError::Io(_) => CliError::Config(msg),
            _ => CliError::Numerical(msg),
        }
    }
}

impl From<HovdError> for CliError {
    fn from(e: HovdError) -> Self {
        match e {
            HovdError::Core(c) => c.into(),
            HovdError::Config(s) | HovdError::ShapeMismatch(s) => CliError::Config(s),
            other => CliError::Numerical(other.to_string()),
        }
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Config(e.to_string())
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;
