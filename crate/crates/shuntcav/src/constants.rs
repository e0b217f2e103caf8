//! Physical constants (SI).
//!
//! `EPS0` is defined as `1/(MU0*C0^2)` rather than quoted separately so the
//! identity `c = 1/sqrt(eps0*mu0)` holds to rounding, which several closed
//! forms in this crate rely on when they are rearranged into each other.

/// Speed of light in vacuum, m/s (exact).
pub const C0: f64 = 299_792_458.0;

/// Vacuum permeability, H/m (CODATA 2018).
pub const MU0: f64 = 1.256_637_062_12e-6;

/// Vacuum permittivity, F/m, defined via `1/(MU0*C0^2)`.
pub const EPS0: f64 = 1.0 / (MU0 * C0 * C0);

/// One gigahertz in hertz.
pub const GHZ: f64 = 1.0e9;

/// One millimeter in meters.
pub const MM: f64 = 1.0e-3;

/// Bundle of the vacuum constants, for callers that want to thread them
/// explicitly instead of using the module-level values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalConstants {
    pub eps0: f64,
    pub mu0: f64,
    pub c: f64,
}

impl Default for PhysicalConstants {
    fn default() -> Self {
        PhysicalConstants {
            eps0: EPS0,
            mu0: MU0,
            c: C0,
        }
    }
}

impl PhysicalConstants {
    /// Relative error of `c - 1/sqrt(eps0*mu0)`; zero for the default set.
    pub fn consistency_error(&self) -> f64 {
        let c_derived = 1.0 / (self.eps0 * self.mu0).sqrt();
        ((self.c - c_derived) / self.c).abs()
    }
}
