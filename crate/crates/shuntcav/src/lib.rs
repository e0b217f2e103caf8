//! Electromagnetic mode models for superconducting-qubit package enclosures
//! whose walls are tied together by periodic arrays of inductive shunts
//! (through-substrate vias or solder bumps).
//!
//! The crate provides three mutually checking descriptions of the same
//! physics, plus the machinery to compare them:
//!
//! - [`spectra`]: closed-form box modes, the boundary-model cutoff of a
//!   shunt lattice, and the plasma-like shifted spectrum it imposes on the
//!   enclosure modes.
//! - [`circuit`]: a lumped mesh model of the shunt lattice (inductively
//!   coupled LC cells) with closed-form and numeric mode frequencies, mode
//!   field maps, and parameter fitting.
//! - [`oracle`]: a direct finite-difference solver for the 2D Helmholtz
//!   problem in the real geometry, used as ground truth for both models.
//! - [`crosstalk`]: evanescent qubit-qubit coupling mediated by the shunted
//!   enclosure below its cutoff, with the penetration depth that controls
//!   its exponential suppression.
//!
//! Internal unit system is SI: lengths in meters, frequencies in hertz,
//! angular frequencies in rad/s. Conversions to the GHz/mm ranges natural
//! for package work belong at the interface (see the CLI crate).

pub mod circuit;
pub mod constants;
pub mod crosstalk;
pub mod error;
pub mod model;
pub mod oracle;
pub mod specfun;
pub mod spectra;

mod simplex;

pub use error::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
