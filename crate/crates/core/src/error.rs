//! Error types shared across the crate.

use thiserror::Error;

/// A numeric input violated one of its documented preconditions.
///
/// Carries the offending parameter name, the value that was passed and the
/// constraint it broke, so callers (and the CLI) can report exactly which
/// precondition failed.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("{name} = {value} violates `{requirement}`")]
pub struct DomainError {
    /// Name of the offending parameter.
    pub name: &'static str,
    /// The value that was rejected.
    pub value: f64,
    /// The constraint that was violated, e.g. `0 <= x <= 1`.
    pub requirement: &'static str,
}

impl DomainError {
    pub fn new(name: &'static str, value: f64, requirement: &'static str) -> Self {
        Self {
            name,
            value,
            requirement,
        }
    }
}

/// Checks a precondition, producing a [`DomainError`] when it does not hold.
///
/// Written so that NaN inputs fail every constraint (the condition must be
/// affirmatively true).
pub(crate) fn require(
    cond: bool,
    name: &'static str,
    value: f64,
    requirement: &'static str,
) -> Result<(), DomainError> {
    if cond {
        Ok(())
    } else {
        Err(DomainError::new(name, value, requirement))
    }
}
