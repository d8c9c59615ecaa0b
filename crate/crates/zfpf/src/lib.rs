//! Deterministic approximation of zero-free partition functions.
//!
//! The crate estimates partition functions of (k,d)-local Hamiltonians
//! under tensorized measurement, and of Boolean CSPs with an external
//! field, by computing Taylor coefficients of the log over a dependency
//! graph and interpolating a truncated expansion inside a zero-free
//! region. Everything the fast path produces can be cross-checked against
//! exact, exponential-cost reference implementations in [`oracle`], and a
//! seeded self-reduction sampler draws from the Gibbs measurement
//! distribution in the high-temperature regime.
//!
//! Module map:
//!
//! - [`graph`] — dependency graphs and connected-subset enumeration;
//! - [`series`] — truncated Taylor arithmetic and Newton's identity;
//! - [`family`] — the bounded-family contract and the cluster-coefficient
//!   engine computing `log f_G`;
//! - [`interpolate`] — good regions, truncation orders, and the top-level
//!   multiplicative estimator;
//! - [`quantum`] — local Hamiltonians, the quantum family, the
//!   high-temperature estimator and the Gibbs sampler;
//! - [`csp`] — Boolean CSPs with external field as a (1,1)-bounded family;
//! - [`oracle`] — dense exact references for all of the above;
//! - [`cli`] — JSON front door used by the `zfpf` binary.

pub mod cli;
pub mod csp;
pub mod error;
pub mod family;
pub mod graph;
pub mod interpolate;
pub mod oracle;
pub mod quantum;
pub mod series;

mod linalg;

pub use error::{Error, Result};
