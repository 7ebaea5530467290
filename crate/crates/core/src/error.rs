use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {left} is {left_dims}, {right} is {right_dims}")]
    DimensionMismatch {
        left: String,
        left_dims: String,
        right: String,
        right_dims: String,
    },

    #[error("id mismatch at position {index}: {left} has {left_id:?}, {right} has {right_id:?}")]
    IdMismatch {
        index: usize,
        left: String,
        left_id: String,
        right: String,
        right_id: String,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("{source_name}: line {line}: {message}")]
    Parse {
        source_name: String,
        line: u64,
        message: String,
    },

    #[error("language mismatch: {0}")]
    LanguageMismatch(String),

    #[error(
        "medoids of clusters {first} and {second} coincide (documents {first_doc} and {second_doc} at distance 0)"
    )]
    CoincidentMedoids {
        first: usize,
        second: usize,
        first_doc: usize,
        second_doc: usize,
    },

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    pub(crate) fn parse(source_name: &str, line: u64, message: impl Into<String>) -> Self {
        Error::Parse {
            source_name: source_name.to_string(),
            line,
            message: message.into(),
        }
    }
}
