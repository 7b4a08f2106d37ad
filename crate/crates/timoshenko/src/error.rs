use std::path::PathBuf;

use timoshenko_core::timestepper::RunFailure;

#[derive(Debug, thiserror::Error)]
pub enum AppError {
    #[error("usage: {0}")]
    Usage(String),

    #[error("numerical failure: {0}")]
    Numeric(#[from] timoshenko_core::Error),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
}

impl AppError {
    pub fn usage(msg: impl Into<String>) -> Self {
        AppError::Usage(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        AppError::Io {
            path: path.into(),
            source,
        }
    }

    /// 1 usage, 2 numerical, 3 input/output.
    pub fn exit_code(&self) -> u8 {
        match self {
            AppError::Usage(_) => 1,
            AppError::Numeric(_) => 2,
            AppError::Io { .. } | AppError::Format { .. } => 3,
        }
    }
}

impl From<RunFailure> for AppError {
    fn from(f: RunFailure) -> Self {
        AppError::Numeric(f.error)
    }
}
