use std::io;

use thiserror::Error;

/// Errors produced by the hypergraph engine.
#[derive(Debug, Error)]
pub enum Error {
    #[error("index {index} out of range for {what} of size {len}")]
    IndexOutOfRange {
        what: &'static str,
        index: usize,
        len: usize,
    },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("{what} not found: {id}")]
    NotFound { what: &'static str, id: String },

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("format error: {0}")]
    Format(String),

    #[error("similarity undefined: {0}")]
    UndefinedSimilarity(String),

    #[error("query space mismatch: expected dimension {expected}, got {got}")]
    QuerySpace { expected: usize, got: usize },

    #[error("revision conflict: expected {expected}, current {current}")]
    Conflict { expected: u64, current: u64 },

    #[error("nothing to {0}")]
    NothingToDo(&'static str),

    #[error("operation cancelled")]
    Cancelled,

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn not_found(what: &'static str, id: impl ToString) -> Self {
        Error::NotFound {
            what,
            id: id.to_string(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
