//! Error taxonomy shared by every module.
//!
//! The four variants deliberately mirror the four failure classes a caller
//! can act on: reject the input, leave the model's validity domain, give up
//! on an iterative solve, or give up on a fit. The CLI maps them onto its
//! exit codes one-to-one.

use thiserror::Error;

#[derive(Debug, Clone, Error)]
pub enum Error {
    /// Structurally invalid input: violated precondition, malformed
    /// geometry, inconsistent sizes.
    #[error("invalid input: {0}")]
    Invalid(String),

    /// Input is well formed but outside the region where the model is
    /// meaningful (e.g. a qubit frequency above the cutoff it is supposed
    /// to sit below).
    #[error("model domain: {0}")]
    Domain(String),

    /// An iterative solver failed to reach its tolerance.
    #[error("solver did not converge: {message} (achieved residual {achieved:.3e})")]
    Solver { message: String, achieved: f64 },

    /// A parameter fit failed to converge or its input cannot constrain
    /// the parameters.
    #[error("fit failed: {0}")]
    Fit(String),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }

    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub fn solver(msg: impl Into<String>, achieved: f64) -> Self {
        Error::Solver {
            message: msg.into(),
            achieved,
        }
    }

    pub fn fit(msg: impl Into<String>) -> Self {
        Error::Fit(msg.into())
    }
}
