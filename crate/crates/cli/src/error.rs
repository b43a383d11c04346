use std::path::{Path, PathBuf};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),

    #[error("data file {path}: {message}")]
    Data { path: PathBuf, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("write failed: {0}")]
    Write(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Core(#[from] ccbm::Error),
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io { path: path.to_path_buf(), source }
    }

    pub fn data(path: &Path, message: impl Into<String>) -> Self {
        CliError::Data { path: path.to_path_buf(), message: message.into() }
    }

    /// 2 for bad input, 4 when nothing was detected, 3 for everything else.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Data { .. } => 2,
            CliError::Core(e) if is_no_detection(e) => 4,
            _ => 3,
        }
    }
}

pub fn is_no_detection(e: &ccbm::Error) -> bool {
    matches!(e.root(), ccbm::Error::NoNegativeMinimum | ccbm::Error::NoMinima | ccbm::Error::NoRejection)
}
