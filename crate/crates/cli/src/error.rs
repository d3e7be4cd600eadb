use mmloc_core::{ErrorKind, StageError};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Core(#[from] mmloc_core::Error),

    #[error(transparent)]
    Stage(#[from] StageError),
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Core(e.into())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Core(e.into())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Core(e.into())
    }
}

impl CliError {
    /// 2 for configuration problems, 3 for bad data, 4 for numerical
    /// failures.
    pub fn exit_code(&self) -> i32 {
        let kind = match self {
            CliError::Config(_) => ErrorKind::Config,
            CliError::Core(e) => e.kind(),
            CliError::Stage(e) => e.kind(),
        };
        match kind {
            ErrorKind::Config => 2,
            ErrorKind::Data => 3,
            ErrorKind::Numerical => 4,
        }
    }
}
