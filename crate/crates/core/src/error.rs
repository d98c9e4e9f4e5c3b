use thiserror::Error;

/// Errors raised by the numeric core.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An input was outside the mathematical domain of an operation
    /// (negative speed, non-finite coordinate, probability outside [0, 1]).
    #[error("numeric domain error: {0}")]
    NumericDomain(String),
    /// An operation was called in a state that cannot satisfy it
    /// (sampling an empty buffer, selecting from an empty action mask).
    #[error("invalid state: {0}")]
    State(String),
    /// Structurally invalid input (malformed geometry, bad dimensions).
    #[error("invalid input: {0}")]
    Invalid(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn ensure_finite(name: &str, values: &[f64]) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NumericDomain(format!("{name} must be finite")))
    }
}
