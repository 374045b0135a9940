use std::io;
use std::path::{Path, PathBuf};

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Core(#[from] spoofguard_core::Error),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error("{path}: malformed {what}: {reason}")]
    Format { path: PathBuf, what: &'static str, reason: String },

    #[error("{path}: unsupported audio format: {reason}")]
    UnsupportedFormat { path: PathBuf, reason: String },

    #[error("{path}:{line}: {reason}")]
    Parse { path: PathBuf, line: usize, reason: String },

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("usage: {0}")]
    Usage(String),

    #[error("stage `{stage}` failed: {source} (artifacts kept in {})", .artifacts.display())]
    Stage {
        stage: &'static str,
        artifacts: PathBuf,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn io(path: &Path, source: io::Error) -> Self {
        Error::Io { path: path.to_path_buf(), source }
    }

    pub fn format(path: &Path, what: &'static str, reason: impl Into<String>) -> Self {
        Error::Format { path: path.to_path_buf(), what, reason: reason.into() }
    }

    pub fn validation(reason: impl Into<String>) -> Self {
        Error::Validation(reason.into())
    }

    /// Process exit status: 1 usage, 2 data or validation, 3 training failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Usage(_) => 1,
            Error::Core(spoofguard_core::Error::TrainingFailure { .. }) => 3,
            Error::Core(spoofguard_core::Error::Config(_)) => 1,
            Error::Stage { source, .. } => source.exit_code(),
            _ => 2,
        }
    }
}

pub(crate) trait IoContext<T> {
    fn at(self, path: &Path) -> Result<T>;
}

impl<T> IoContext<T> for io::Result<T> {
    fn at(self, path: &Path) -> Result<T> {
        self.map_err(|e| Error::io(path, e))
    }
}
