use std::io;
use std::path::{Path, PathBuf};

use thermoloss_core::Error as CoreError;

use crate::pgm::PgmFileError;

/// Exit code for malformed input or invalid arguments.
pub const EXIT_INPUT: i32 = 2;
/// Exit code when a solver ran out of iterations or a trainer diverged.
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}: {source}")]
    Json { path: PathBuf, source: serde_json::Error },
    #[error(transparent)]
    Pgm(#[from] PgmFileError),
    #[error("{0}")]
    Input(String),
    #[error(transparent)]
    Core(CoreError),
}

impl CliError {
    pub fn io(path: &Path, source: io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn json(path: &Path, source: serde_json::Error) -> Self {
        CliError::Json {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(CoreError::NotConverged { .. } | CoreError::Diverged { .. }) => EXIT_NUMERICAL,
            _ => EXIT_INPUT,
        }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        CliError::Core(e)
    }
}
