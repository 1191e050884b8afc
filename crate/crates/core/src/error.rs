use thiserror::Error;

/// Errors raised by dataset handling and the statistics routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("line {line}: {message}")]
    Malformed { line: u64, message: String },

    #[error("line {line}: duplicate id {id}")]
    DuplicateId { line: u64, id: u64 },

    #[error("line {line}: non-finite coordinate")]
    NonFinite { line: u64 },

    #[error("empty input: {0}")]
    Empty(String),

    #[error("unknown point id {0}")]
    UnknownId(u64),

    #[error("unknown category {0}")]
    UnknownCategory(String),

    #[error("category {0} has no points")]
    CategoryAbsent(usize),

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid probability vector: {0}")]
    InvalidProbability(String),

    #[error("id sets differ: {0}")]
    IdMismatch(String),

    #[error("i/o: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
