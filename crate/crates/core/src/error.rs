use thiserror::Error;

/// Errors raised by the library. Configuration problems are separated from
/// I/O so the CLI can map them onto distinct exit codes.
#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("invalid query: {0}")]
    Query(String),
    #[error("instance too large for exhaustive search: {points} points (cap {cap})")]
    TooLarge { points: usize, cap: usize },
    #[error("malformed input at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn query(msg: impl Into<String>) -> Self {
        Error::Query(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
