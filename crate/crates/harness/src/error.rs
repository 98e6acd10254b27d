use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, HarnessError>;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid `{field}`: {reason}")]
    Spec { field: String, reason: String },

    #[error("config error: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {reason}")]
    Format { path: PathBuf, reason: String },

    #[error(transparent)]
    Algorithm(#[from] ldme_core::Error),
}

impl HarnessError {
    pub fn spec(field: impl Into<String>, reason: impl Into<String>) -> Self {
        HarnessError::Spec {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        HarnessError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn format(path: impl Into<PathBuf>, reason: impl Into<String>) -> Self {
        HarnessError::Format {
            path: path.into(),
            reason: reason.into(),
        }
    }

    /// Process exit code: 2 config, 3 algorithmic infeasibility, 4 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Spec { .. } | HarnessError::Config(_) => 2,
            HarnessError::Io { .. } | HarnessError::Format { .. } => 4,
            HarnessError::Algorithm(ldme_core::Error::InvalidParameter { .. }) => 2,
            HarnessError::Algorithm(_) => 3,
        }
    }
}
