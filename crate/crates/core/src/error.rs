use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    Dimension {
        context: String,
        expected: usize,
        actual: usize,
    },

    #[error("task id {task} out of range (model has {n_tasks} tasks)")]
    TaskOutOfRange { task: usize, n_tasks: usize },

    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("{0}")]
    Format(String),

    #[error("path does not exist: {}", .0.display())]
    MissingPath(PathBuf),

    #[error("empty batch")]
    EmptyBatch,

    #[error("empty test set")]
    EmptyTestSet,

    #[error("quantization failed: {0}")]
    Quantization(String),

    #[error("emulator fault: {0}")]
    Emulator(String),

    #[error("I/O error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn dim(context: impl Into<String>, expected: usize, actual: usize) -> Self {
        Error::Dimension {
            context: context.into(),
            expected,
            actual,
        }
    }

    /// Process exit code for the command-line tool: 2 for user or
    /// configuration errors, 3 for data and shape errors, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::MissingPath(_) | Error::EmptyTestSet | Error::TaskOutOfRange { .. } => 2,
            Error::Dimension { .. } | Error::Parse { .. } | Error::Format(_) | Error::Quantization(_) => 3,
            _ => 1,
        }
    }
}
