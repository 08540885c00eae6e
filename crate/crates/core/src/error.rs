use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Broad failure category, used by front ends to pick an exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Validation,
    Solver,
    Io,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error: {0}")]
    Parse(String),

    /// A record failed validation. `row` is 1-based over data records.
    #[error("row {row}: {message}")]
    InvalidRow { row: usize, message: String },

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("invalid function catalog: {0}")]
    InvalidCatalog(String),

    #[error("invalid selection: {0}")]
    InvalidSelection(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("COBias needs at least two classes with labeled instances, found {present}")]
    TooFewClasses { present: usize },

    #[error("search space of {size} vectors exceeds the limit of {limit}")]
    SearchSpaceTooLarge { size: u128, limit: u128 },

    #[error("neighborhood domain needs at least two values, got {0}")]
    DomainTooSmall(usize),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn row(row: usize, message: impl Into<String>) -> Self {
        Error::InvalidRow {
            row,
            message: message.into(),
        }
    }

    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Io { .. } => ErrorKind::Io,
            Error::TooFewClasses { .. }
            | Error::SearchSpaceTooLarge { .. }
            | Error::DomainTooSmall(_) => ErrorKind::Solver,
            _ => ErrorKind::Validation,
        }
    }
}
