//! Crate-wide error type.

use std::fmt;
use std::path::PathBuf;

/// Errors produced by any operation in this crate.
#[derive(Debug)]
pub enum Error {
    /// Tensor or weight shapes do not agree with the operation contract.
    Shape(String),
    /// A configuration or argument violates a precondition.
    Invalid(String),
    /// A text input could not be parsed. `line` and `column` are 1-based
    /// where known.
    Parse {
        path: String,
        line: Option<usize>,
        column: Option<usize>,
        msg: String,
    },
    /// An I/O failure, with the path that was being accessed.
    Io { path: PathBuf, source: std::io::Error },
    /// A serialized container is malformed or does not match expectations.
    Format(String),
    /// Training produced a non-finite loss.
    NanLoss { epoch: usize, batch: usize },
}

pub type Result<T> = std::result::Result<T, Error>;

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Shape(msg) => write!(f, "shape mismatch: {msg}"),
            Self::Invalid(msg) => write!(f, "invalid argument: {msg}"),
            Self::Parse { path, line, column, msg } => {
                write!(f, "parse error in {path}")?;
                if let Some(l) = line {
                    write!(f, ", line {l}")?;
                }
                if let Some(c) = column {
                    write!(f, ", column {c}")?;
                }
                write!(f, ": {msg}")
            }
            Self::Io { path, source } => write!(f, "i/o error on {}: {source}", path.display()),
            Self::Format(msg) => write!(f, "container format error: {msg}"),
            Self::NanLoss { epoch, batch } => {
                write!(f, "training aborted: non-finite loss at epoch {epoch}, batch {batch}")
            }
        }
    }
}

impl std::error::Error for Error {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            Self::Io { source, .. } => Some(source),
            _ => None,
        }
    }
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io { path: path.into(), source }
    }
}
