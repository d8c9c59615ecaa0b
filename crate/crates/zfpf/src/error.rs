//! Error taxonomy shared across the crate.
//!
//! Variants map one-to-one onto the CLI exit codes: invalid input and
//! domain errors exit 2, out-of-regime 3, capability 4, numeric 5.

use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// Malformed or inconsistent input (bad subsets, schema violations,
    /// broken invariants of a model description).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Arguments outside the mathematical domain of an operation
    /// (e.g. a log of a non-positive constant term).
    #[error("domain error: {0}")]
    Domain(String),

    /// Query point outside the region the method is justified on.
    #[error("out of regime: {0}")]
    OutOfRegime(String),

    /// The request is well-formed but exceeds a configured resource cap.
    #[error("capability exceeded: {0}")]
    Capability(String),

    /// A computation produced non-finite or otherwise unusable numbers,
    /// typically signalling that a zero-freeness assumption was violated.
    #[error("numeric failure: {0}")]
    Numeric(String),
}

impl Error {
    /// Process exit code used by the CLI for this error class.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidInput(_) | Error::Domain(_) => 2,
            Error::OutOfRegime(_) => 3,
            Error::Capability(_) => 4,
            Error::Numeric(_) => 5,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
