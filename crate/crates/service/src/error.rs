use std::io;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error(transparent)]
    Core(#[from] hyperlens_core::Error),

    #[error("session file version {found} is newer than the supported version {supported}")]
    FutureVersion { found: u64, supported: u64 },

    #[error("not a session file: {0}")]
    NotSession(String),

    #[error("corrupt session file: {0}")]
    Corrupt(String),

    #[error("bad request: {0}")]
    BadRequest(String),

    #[error("image error: {0}")]
    Image(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

pub type Result<T, E = ServiceError> = std::result::Result<T, E>;
