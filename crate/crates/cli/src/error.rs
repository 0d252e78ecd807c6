use std::path::Path;

use alphasplit_core::Error;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("config error at `{path}`: {message}")]
    Schema { path: String, message: String },
    #[error("solver failure: {0}")]
    Solver(String),
    #[error("{0}")]
    Cap(String),
    #[error("no exact path: {0}")]
    NoExactPath(String),
    #[error("cross-check gate exceeded: {0}")]
    Gate(String),
}

impl CliError {
    pub fn schema(path: &str, message: impl std::fmt::Display) -> Self {
        CliError::Schema {
            path: path.to_string(),
            message: message.to_string(),
        }
    }

    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.display().to_string(),
            source,
        }
    }

    /// Maps a core error raised while handling the config section `path`.
    pub fn from_core(path: &str, e: Error) -> Self {
        match e {
            Error::ConvergenceFailure { .. } | Error::SectorAmbiguous(_) => {
                CliError::Solver(e.to_string())
            }
            Error::CapExceeded(_) => CliError::Cap(e.to_string()),
            Error::Unsupported(_) => CliError::NoExactPath(e.to_string()),
            _ => CliError::schema(path, e),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io { .. } => 1,
            CliError::Schema { .. } => 2,
            CliError::Solver(_) => 3,
            CliError::Cap(_) => 4,
            CliError::NoExactPath(_) => 5,
            CliError::Gate(_) => 6,
        }
    }
}
