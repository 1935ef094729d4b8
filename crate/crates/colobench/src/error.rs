use std::path::{Path, PathBuf};

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Process exit codes.
pub const EXIT_OK: i32 = 0;
pub const EXIT_INTERNAL: i32 = 1;
pub const EXIT_INVALID: i32 = 2;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },

    #[error("cannot write {}: {source}", path.display())]
    Write { path: PathBuf, source: std::io::Error },

    #[error("{}{}: {msg}", path.display(), line.map(|l| format!(":{l}")).unwrap_or_default())]
    Format { path: PathBuf, line: Option<usize>, msg: String },

    #[error("{}: {msg}", path.display())]
    Range { path: PathBuf, msg: String },

    #[error("{}: expected {expected} relative poses, found {actual}", path.display())]
    Submission { path: PathBuf, expected: usize, actual: usize },

    #[error("{}: {msg}", path.display())]
    MissingData { path: PathBuf, msg: String },

    #[error("{0}")]
    Consistency(String),

    #[error("{context}: {source}")]
    Eval { context: String, source: colobench_core::Error },

    #[error("{0}")]
    Usage(String),

    #[error("internal error: {0}")]
    Internal(String),
}

impl Error {
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Write { .. } | Error::Internal(_) => EXIT_INTERNAL,
            _ => EXIT_INVALID,
        }
    }

    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        Error::Io { path: path.to_path_buf(), source }
    }

    pub(crate) fn write(path: &Path, source: std::io::Error) -> Self {
        Error::Write { path: path.to_path_buf(), source }
    }

    pub(crate) fn format(path: &Path, line: Option<usize>, msg: impl Into<String>) -> Self {
        Error::Format { path: path.to_path_buf(), line, msg: msg.into() }
    }

    pub(crate) fn missing(path: &Path, msg: impl Into<String>) -> Self {
        Error::MissingData { path: path.to_path_buf(), msg: msg.into() }
    }
}

/// Attaches a human-readable location to core errors.
pub(crate) trait Context<T> {
    fn context(self, what: impl FnOnce() -> String) -> Result<T>;
}

impl<T> Context<T> for colobench_core::Result<T> {
    fn context(self, what: impl FnOnce() -> String) -> Result<T> {
        self.map_err(|source| Error::Eval { context: what(), source })
    }
}
