use std::path::Path;

use cscavity_core::Error;
use thiserror::Error;

pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;
pub const EXIT_IO: i32 = 4;

#[derive(Debug, Error)]
#[error("{message}")]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn validation(message: impl Into<String>) -> Self {
        CliError {
            code: EXIT_VALIDATION,
            message: message.into(),
        }
    }

    /// Prefixes the message with `label`.
    pub fn context(self, label: &str) -> Self {
        CliError {
            code: self.code,
            message: format!("{label}: {}", self.message),
        }
    }

    /// Attaches a file path to the message.
    pub fn at(path: &Path, err: impl Into<CliError>) -> Self {
        let e = err.into();
        CliError {
            code: e.code,
            message: format!("{}: {}", path.display(), e.message),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = if e.is_io() {
            EXIT_IO
        } else if e.is_validation() {
            EXIT_VALIDATION
        } else {
            EXIT_NUMERICAL
        };
        CliError {
            code,
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError {
            code: EXIT_IO,
            message: e.to_string(),
        }
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        if e.is_io() {
            CliError {
                code: EXIT_IO,
                message: e.to_string(),
            }
        } else {
            CliError::validation(e.to_string())
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
