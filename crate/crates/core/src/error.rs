use thiserror::Error;

/// Errors raised anywhere in the naming pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("srt block {block}: {message}")]
    Srt { block: usize, message: String },

    #[error("csv row {row}: {message}")]
    Csv { row: usize, message: String },

    #[error("csv header: {0}")]
    Header(String),

    #[error("no identifiable characters")]
    EmptyRoster,

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("config key `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("instance too large for grid enumeration: n = {n}, k = {k}")]
    OracleTooLarge { n: usize, k: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn csv(row: usize, message: impl Into<String>) -> Self {
        Error::Csv {
            row,
            message: message.into(),
        }
    }

    pub(crate) fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
