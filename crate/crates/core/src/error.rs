//! Error type shared across the engine.

use alloc::string::String;
use core::fmt;

/// Errors surfaced by the engine's fallible operations.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AlError {
    /// Matrix/vector dimensions do not line up, or an index is out of range.
    Shape(String),
    /// A configuration value is outside its legal range.
    Config(String),
    /// A byte-level payload (snapshot, dataset) failed to parse.
    Format(String),
    /// The requested operation cannot proceed in the current state,
    /// e.g. scoring before any training round.
    State(String),
}

impl fmt::Display for AlError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AlError::Shape(msg) => write!(f, "shape error: {msg}"),
            AlError::Config(msg) => write!(f, "config error: {msg}"),
            AlError::Format(msg) => write!(f, "format error: {msg}"),
            AlError::State(msg) => write!(f, "state error: {msg}"),
        }
    }
}

impl core::error::Error for AlError {}

/// Convenience alias used throughout the crate.
pub type Result<T> = core::result::Result<T, AlError>;
