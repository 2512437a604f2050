//! Error taxonomy shared by the core modules.
//!
//! Two families cover everything the library can reject: configuration errors
//! (a scenario that can never be simulated, e.g. `M mod B != 0`) and domain
//! errors (an operation applied to arguments outside its contract, e.g. a
//! path-loss query at zero distance).

use thiserror::Error;

/// Errors produced by core operations.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum CoreError {
    /// The scenario or parameter set is self-inconsistent.
    #[error("configuration error: {0}")]
    Config(String),
    /// An operation was called with arguments outside its domain.
    #[error("domain error: {0}")]
    Domain(String),
}

impl CoreError {
    /// Shorthand for a configuration error with a formatted message.
    pub fn config(msg: impl Into<String>) -> Self {
        CoreError::Config(msg.into())
    }

    /// Shorthand for a domain error with a formatted message.
    pub fn domain(msg: impl Into<String>) -> Self {
        CoreError::Domain(msg.into())
    }
}
