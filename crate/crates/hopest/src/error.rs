//! Crate-wide error type.
//!
//! Three broad classes exist so a caller (in particular the CLI) can map them
//! to distinct exit codes: bad configuration, bad input data, and numerical
//! faults raised while running.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A parameter or configuration value is out of its valid domain.
    #[error("config error: {0}")]
    Config(String),

    /// Input data (a log file, a dataset, a CSV row) is missing or malformed.
    #[error("data error: {0}")]
    Data(String),

    /// A computation produced a non-finite or otherwise unusable value.
    #[error("numeric fault: {0}")]
    Numeric(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn data(msg: impl Into<String>) -> Self {
        Error::Data(msg.into())
    }

    pub fn numeric(msg: impl Into<String>) -> Self {
        Error::Numeric(msg.into())
    }
}
