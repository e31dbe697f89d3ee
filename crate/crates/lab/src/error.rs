use std::path::PathBuf;

use thiserror::Error;

/// Errors surfaced by the lab, grouped by the exit code they map to.
#[derive(Debug, Error)]
pub enum LabError {
    #[error("config error: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
    #[error(transparent)]
    Core(#[from] infovae_core::error::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = LabError> = std::result::Result<T, E>;

impl LabError {
    pub fn config(msg: impl Into<String>) -> Self {
        LabError::Config(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> Self {
        let path = path.into();
        move |source| LabError::Io { path, source }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        LabError::Format {
            path: path.into(),
            message: message.into(),
        }
    }

    /// Process exit status: 2 for bad input, 3 for numerical failures,
    /// 1 for anything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            LabError::Config(_) | LabError::Format { .. } => 2,
            LabError::Io { source, .. } if source.kind() == std::io::ErrorKind::NotFound => 2,
            LabError::Core(infovae_core::error::Error::NonFinite(_)) => 3,
            LabError::Core(infovae_core::error::Error::InvalidArgument(_)) => 2,
            _ => 1,
        }
    }
}
