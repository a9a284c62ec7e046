//! Crate-wide error type.

use std::io;

/// Errors raised by the objectives, policies, data generator, trainer and harness.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// An input lies outside the mathematical domain of an operation
    /// (non-finite score, probability outside (0, 1), empty metric input).
    #[error("domain error: {0}")]
    Domain(String),
    /// Inconsistent or invalid configuration.
    #[error("configuration error: {0}")]
    Config(String),
    /// Unknown prompt or response id.
    #[error("lookup error: {0}")]
    Lookup(String),
    /// A statistic is undefined for the given data (e.g. zero total variance).
    #[error("undefined statistic: {0}")]
    UndefinedStatistic(String),
    /// Malformed serialized artifact.
    #[error("parse error: {0}")]
    Parse(String),
    #[error("I/O error: {0}")]
    Io(#[from] io::Error),
    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn ensure_finite(name: &str, value: f64) -> Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("{name} must be finite, got {value}")))
    }
}
