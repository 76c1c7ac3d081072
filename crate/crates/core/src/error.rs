use thiserror::Error;

/// Errors raised by the library and mapped onto CLI exit codes.
#[derive(Debug, Error)]
pub enum Error {
    /// Malformed arguments to an operation (dimension mismatch, non-finite time, ...).
    #[error("input error: {0}")]
    Input(String),
    /// Inconsistent or out-of-range configuration.
    #[error("configuration error: {0}")]
    Config(String),
    /// A size guard refused the request.
    #[error("guard violation: {0}")]
    Guard(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Process exit code for this error class: 2 for configuration/input
    /// problems, 3 for guard violations.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Guard(_) => 3,
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
