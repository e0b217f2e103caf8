//! Enclosure-mediated qubit-qubit coupling and drive-line crosstalk.
//!
//! Below the shunt-lattice cutoff the enclosure supports only evanescent
//! fields, so couplings between ports fall off as the modified Bessel
//! function `K0(d/delta_p)` of their separation. This module computes the
//! penetration depth `delta_p` from either band description, the absolute
//! and normalized coupling profiles, bound-state lengths near a band edge,
//! and the trans-impedance route that derives the same profile from an
//! explicit port network.

use num_complex::Complex64;

use crate::constants::{EPS0, MU0};
use crate::specfun::{self, hankel2_of_negative_imag, lattice_pi};
use crate::spectra::{plasma_frequency, PlasmaBand};
use crate::{Error, Result};

/// A transmon-style port embedded in the enclosure.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QubitPort {
    /// Qubit angular frequency, rad/s.
    pub omega_q: f64,
    /// Junction-related inductance, H.
    pub junction_inductance: f64,
    /// Qubit shunt capacitance, F.
    pub c_q: f64,
    /// Coupling capacitance to the enclosure waveguide, F.
    pub c_g: f64,
}

impl QubitPort {
    pub fn new(omega_q: f64, junction_inductance: f64, c_q: f64, c_g: f64) -> Result<Self> {
        for (name, v) in [
            ("omega_q", omega_q),
            ("junction inductance", junction_inductance),
            ("C_q", c_q),
            ("C_g", c_g),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::invalid(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(QubitPort { omega_q, junction_inductance, c_q, c_g })
    }

    pub fn frequency_ghz(&self) -> f64 {
        self.omega_q / (2.0 * std::f64::consts::PI * 1e9)
    }
}

/// Parameters of the radial-waveguide channel between ports.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaveguideCoupling {
    /// Interaction length between a port and the waveguide, m.
    pub delta0: f64,
    /// Wave speed in the dielectric, m/s.
    pub v: f64,
    /// Characteristic impedance at `delta0`; purely imaginary below the
    /// lattice cutoff.
    pub z0: Complex64,
    /// Per-length coupling capacitance, F/m.
    pub c_g_per_len: f64,
    /// Per-length line capacitance, F/m.
    pub c_r_per_len: f64,
    /// Effective coupling rate, rad/s (see [`waveguide_g`]).
    pub g: f64,
}

impl WaveguideCoupling {
    pub fn new(
        delta0: f64,
        v: f64,
        z0: Complex64,
        c_g_per_len: f64,
        c_r_per_len: f64,
    ) -> Result<Self> {
        if !(delta0 > 0.0) || !delta0.is_finite() {
            return Err(Error::invalid(format!("delta0 must be positive, got {delta0}")));
        }
        if !(v > 0.0) || !v.is_finite() {
            return Err(Error::invalid(format!("wave speed must be positive, got {v}")));
        }
        if z0.re != 0.0 {
            return Err(Error::invalid(format!(
                "below cutoff the waveguide impedance is purely imaginary, got {z0}"
            )));
        }
        for (name, v) in [("C_g'", c_g_per_len), ("C_r'", c_r_per_len)] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::invalid(format!("{name} must be >= 0, got {v}")));
            }
        }
        Ok(WaveguideCoupling { delta0, v, z0, c_g_per_len, c_r_per_len, g: 0.0 })
    }

    /// Fills in the effective coupling `g` for a given qubit and
    /// penetration depth.
    pub fn with_g(mut self, qubit: &QubitPort, delta_p: f64) -> Result<Self> {
        self.g = waveguide_g(
            self.c_g_per_len,
            qubit.omega_q,
            self.z0,
            qubit.c_q,
            self.v,
            self.delta0,
            delta_p,
        )?;
        Ok(self)
    }
}

/// One row of a normalized crosstalk profile.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfileEntry {
    /// Qubit index along the line (reference pair is 0-1).
    pub j: u32,
    /// Distance from qubit 0, m.
    pub d: f64,
    /// Coupling normalized to the reference pair.
    pub gamma: f64,
    /// Pure-exponential approximation `exp(-(d - d_ref)/delta_p)`.
    pub gamma_exp: f64,
}

/// Couplings along a line of ports, normalized to the closest pair.
#[derive(Debug, Clone, PartialEq)]
pub struct CrosstalkProfile {
    pub entries: Vec<ProfileEntry>,
    /// Penetration depth used to synthesize the profile (0 when unknown,
    /// e.g. a measured profile loaded for fitting).
    pub delta_p: f64,
}

impl CrosstalkProfile {
    /// Wraps externally supplied entries. Distances must be positive and
    /// strictly increasing and the first coupling must be 1 (the profile's
    /// own reference); monotonicity of the couplings is *not* required
    /// here — noisy measured profiles are accepted and flagged by the fit.
    pub fn new(entries: Vec<ProfileEntry>, delta_p: f64) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::invalid("crosstalk profile has no entries".to_string()));
        }
        if (entries[0].gamma - 1.0).abs() > 1e-6 {
            return Err(Error::invalid(format!(
                "profile must be normalized to its first distance (gamma[0] = {})",
                entries[0].gamma
            )));
        }
        for w in entries.windows(2) {
            if !(w[1].d > w[0].d) {
                return Err(Error::invalid("profile distances must be strictly increasing".to_string()));
            }
        }
        for e in &entries {
            if !(e.d > 0.0) || !(e.gamma > 0.0) {
                return Err(Error::invalid(format!(
                    "profile entries need positive distance and coupling, got d = {}, gamma = {}",
                    e.d, e.gamma
                )));
            }
        }
        Ok(CrosstalkProfile { entries, delta_p })
    }

    /// True when the couplings fall strictly with distance.
    pub fn is_monotone(&self) -> bool {
        self.entries.windows(2).all(|w| w[1].gamma < w[0].gamma)
    }
}

/// A quadratic band edge `omega(k) = omega_b (1 + alpha (k - k_off)^2)`,
/// reduced to the two numbers a bound-state length depends on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BandEdge {
    /// Edge angular frequency, rad/s.
    pub omega_b: f64,
    /// Curvature coefficient, m^2.
    pub alpha: f64,
}

impl BandEdge {
    pub fn new(omega_b: f64, alpha: f64) -> Result<Self> {
        if !(omega_b > 0.0) || !(alpha > 0.0) {
            return Err(Error::invalid(format!(
                "band edge needs omega_b > 0 and alpha > 0, got {omega_b}, {alpha}"
            )));
        }
        Ok(BandEdge { omega_b, alpha })
    }

    /// Edge of the shunt-lattice band: the dispersion
    /// `f = f_p (1 + k^2/(2 k_p^2))` gives `alpha = 1/(2 k_p^2)`.
    pub fn from_plasma(band: &PlasmaBand) -> Self {
        BandEdge {
            omega_b: 2.0 * std::f64::consts::PI * band.f_p,
            alpha: 1.0 / (2.0 * band.k_p * band.k_p),
        }
    }

    /// Edge of the mesh-circuit band: `f = f_c (1 + k^2/(2 k0^2))` gives
    /// `alpha = 1/(2 k0^2)`.
    pub fn from_curvature(f_edge: f64, k0: f64) -> Result<Self> {
        if !(f_edge > 0.0) || !(k0 > 0.0) {
            return Err(Error::invalid(format!(
                "band edge needs f_edge > 0 and k0 > 0, got {f_edge}, {k0}"
            )));
        }
        BandEdge::new(2.0 * std::f64::consts::PI * f_edge, 1.0 / (2.0 * k0 * k0))
    }
}

/// Penetration depth of evanescent fields at `omega_q` below the lattice
/// cutoff `omega_p`:
///
/// `delta_p = 1 / sqrt(eps0 eps_r mu0 (omega_p + omega_q)(omega_p - omega_q))`.
///
/// Diverges as `omega_q -> omega_p` and tends to `c/(sqrt(eps_r) omega_p)`
/// as `omega_q -> 0`.
pub fn penetration_depth(omega_q: f64, omega_p: f64, eps_r: f64) -> Result<f64> {
    if !(omega_p > 0.0) || !(eps_r >= 1.0) {
        return Err(Error::invalid(format!(
            "need omega_p > 0 and eps_r >= 1, got {omega_p}, {eps_r}"
        )));
    }
    if !(omega_q > 0.0) {
        return Err(Error::invalid(format!("omega_q must be positive, got {omega_q}")));
    }
    if omega_q >= omega_p {
        return Err(Error::domain(format!(
            "no evanescent regime: omega_q = {omega_q} is not below the cutoff {omega_p}"
        )));
    }
    Ok(1.0 / (EPS0 * eps_r * MU0 * (omega_p + omega_q) * (omega_p - omega_q)).sqrt())
}

/// The same penetration depth written in lattice geometry:
///
/// `delta_p = a sqrt((ln(a/r) - Pi_lattice)/(2 pi)) / sqrt(1 - (omega_q/omega_p)^2)`,
///
/// with `omega_p` the cutoff of the `(a, r, eps_r)` lattice. Implemented
/// independently of [`penetration_depth`]; the two agree identically.
pub fn penetration_depth_explicit(a: f64, r: f64, eps_r: f64, omega_q: f64) -> Result<f64> {
    if !(r > 0.0) {
        return Err(Error::invalid(format!("shunt radius must be positive, got {r}")));
    }
    let f_p = plasma_frequency(a, r, eps_r)?;
    let omega_p = 2.0 * std::f64::consts::PI * f_p;
    if !(omega_q > 0.0) {
        return Err(Error::invalid(format!("omega_q must be positive, got {omega_q}")));
    }
    if omega_q >= omega_p {
        return Err(Error::domain(format!(
            "no evanescent regime: omega_q = {omega_q} is not below the cutoff {omega_p}"
        )));
    }
    let geom = a * ((a / r).ln() - lattice_pi()).sqrt() / (2.0 * std::f64::consts::PI).sqrt();
    let ratio = omega_q / omega_p;
    Ok(geom / (1.0 - ratio * ratio).sqrt())
}

/// Exchange coupling between two equal-frequency ports a distance `d`
/// apart, mediated by the evanescent waveguide:
///
/// `J = 2 g^2 (omega_q / (v/delta0)^2) K0(d/delta_p)`.
pub fn coupling_j(d: f64, g: f64, omega_q: f64, v: f64, delta0: f64, delta_p: f64) -> Result<f64> {
    if !(d > 0.0) {
        return Err(Error::invalid(format!("distance must be positive, got {d}")));
    }
    for (name, x) in [("omega_q", omega_q), ("v", v), ("delta0", delta0), ("delta_p", delta_p)] {
        if !(x > 0.0) || !x.is_finite() {
            return Err(Error::invalid(format!("{name} must be positive, got {x}")));
        }
    }
    let rate = v / delta0;
    Ok(2.0 * g * g * omega_q / (rate * rate) * specfun::k0(d / delta_p)?)
}

/// Drive-line crosstalk at distance `d`: the prefactor times
/// `K0(d/delta_p)` — the same spatial profile as the exchange coupling.
pub fn drive_coupling(d: f64, prefactor: f64, delta_p: f64) -> Result<f64> {
    if !(d > 0.0) {
        return Err(Error::invalid(format!("distance must be positive, got {d}")));
    }
    if !(delta_p > 0.0) || !delta_p.is_finite() {
        return Err(Error::invalid(format!("delta_p must be positive, got {delta_p}")));
    }
    Ok(prefactor * specfun::k0(d / delta_p)?)
}

/// Large-argument form of the coupling profile:
/// `K0(x) -> sqrt(pi/2) e^{-x} / sqrt(x)` with `x = d/delta_p`.
pub fn asymptotic_tail(d: f64, delta_p: f64) -> Result<f64> {
    let x = d / delta_p;
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::invalid(format!("tail needs d/delta_p > 0, got {x}")));
    }
    Ok((std::f64::consts::PI / 2.0).sqrt() * (-x).exp() / x.sqrt())
}

/// Normalized coupling profile for ports on a line with pitch `a`:
/// qubit `j` sits at `d_j = j a` and
///
/// `Gamma_j = K0(d_j/delta_p) / K0(a/delta_p)`,
///
/// normalized to the closest pair. Each entry also carries the
/// pure-exponential approximation `exp(-(d_j - a)/delta_p)`.
pub fn gamma_profile(positions: &[u32], a: f64, delta_p: f64) -> Result<CrosstalkProfile> {
    if positions.is_empty() {
        return Err(Error::invalid("gamma profile needs at least one qubit position".to_string()));
    }
    if positions[0] != 1 {
        return Err(Error::invalid(format!(
            "the reference pair sits at index 1 (distance a); first position is {}",
            positions[0]
        )));
    }
    if positions.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid("qubit positions must be strictly increasing".to_string()));
    }
    if !(a > 0.0) || !(delta_p > 0.0) {
        return Err(Error::invalid(format!(
            "need positive spacing and depth, got a = {a}, delta_p = {delta_p}"
        )));
    }
    let k_ref = specfun::k0(a / delta_p)?;
    if k_ref == 0.0 {
        return Err(Error::domain(format!(
            "reference coupling underflows: a/delta_p = {} is too deep in the tail",
            a / delta_p
        )));
    }
    let mut entries = Vec::with_capacity(positions.len());
    for &j in positions {
        let d = j as f64 * a;
        entries.push(ProfileEntry {
            j,
            d,
            gamma: specfun::k0(d / delta_p)? / k_ref,
            gamma_exp: (-(d - a) / delta_p).exp(),
        });
    }
    CrosstalkProfile::new(entries, delta_p)
}

/// 1/e localization length of the bound state a qubit forms below a
/// quadratic band edge: `delta_b = sqrt(alpha omega_b / (omega_b - omega_q))`.
pub fn bound_state_length(edge: &BandEdge, omega_q: f64) -> Result<f64> {
    if !(omega_q > 0.0) {
        return Err(Error::invalid(format!("omega_q must be positive, got {omega_q}")));
    }
    if omega_q >= edge.omega_b {
        return Err(Error::domain(format!(
            "no bound state: omega_q = {omega_q} is not below the band edge {}",
            edge.omega_b
        )));
    }
    Ok((edge.alpha * edge.omega_b / (edge.omega_b - omega_q)).sqrt())
}

fn reactive_impedance(c: f64, omega: f64) -> Complex64 {
    // 1/(i omega C), exactly imaginary in f64.
    Complex64::new(0.0, -1.0 / (omega * c))
}

/// Trans-impedance between two ports coupled through the evanescent
/// waveguide, at angular frequency `omega`:
///
/// `Z12 = Zq1 Zq2 Z0 / ((Zg + Zq2)(Zg + Z0)) * H(d) / H(delta0)`,
///
/// with `Zq = 1/(i omega C_q)`, `Zg = 1/(i omega C_g)`, and `H(x)` the
/// outgoing radial-mode factor `H0^(2)(-i x/delta_p)`, normalized so the
/// spatial factor is 1 at `d = delta0`. Purely imaginary for these lossless
/// inputs.
#[allow(clippy::too_many_arguments)]
pub fn trans_impedance(
    d: f64,
    delta_p: f64,
    delta0: f64,
    z0: Complex64,
    c_g: f64,
    c_q1: f64,
    c_q2: f64,
    omega: f64,
) -> Result<Complex64> {
    trans_impedance_impl(d, delta_p, delta0, z0, c_g, c_q1, c_q2, omega, false)
}

/// [`trans_impedance`] in the weak-coupling limit `|Zg| >> |Zq2|, |Z0|`:
///
/// `Z12 = Zq1 Zq2 Z0 / Zg^2 * H(d)/H(delta0)`.
#[allow(clippy::too_many_arguments)]
pub fn trans_impedance_large_zg(
    d: f64,
    delta_p: f64,
    delta0: f64,
    z0: Complex64,
    c_g: f64,
    c_q1: f64,
    c_q2: f64,
    omega: f64,
) -> Result<Complex64> {
    trans_impedance_impl(d, delta_p, delta0, z0, c_g, c_q1, c_q2, omega, true)
}

#[allow(clippy::too_many_arguments)]
fn trans_impedance_impl(
    d: f64,
    delta_p: f64,
    delta0: f64,
    z0: Complex64,
    c_g: f64,
    c_q1: f64,
    c_q2: f64,
    omega: f64,
    large_zg: bool,
) -> Result<Complex64> {
    if !(delta0 > 0.0) || !(delta_p > 0.0) {
        return Err(Error::invalid(format!(
            "need positive lengths, got delta0 = {delta0}, delta_p = {delta_p}"
        )));
    }
    if d < delta0 {
        return Err(Error::invalid(format!(
            "ports closer than the interaction length: d = {d} < delta0 = {delta0}"
        )));
    }
    for (name, v) in [("C_g", c_g), ("C_q1", c_q1), ("C_q2", c_q2), ("omega", omega)] {
        if !(v > 0.0) || !v.is_finite() {
            return Err(Error::invalid(format!("{name} must be positive, got {v}")));
        }
    }
    if z0.re != 0.0 {
        return Err(Error::invalid(format!(
            "below cutoff the waveguide impedance is purely imaginary, got {z0}"
        )));
    }
    let zq1 = reactive_impedance(c_q1, omega);
    let zq2 = reactive_impedance(c_q2, omega);
    let zg = reactive_impedance(c_g, omega);
    let spatial = hankel2_of_negative_imag(0, d / delta_p)? / hankel2_of_negative_imag(0, delta0 / delta_p)?;
    let network = if large_zg {
        zq1 * zq2 * z0 / (zg * zg)
    } else {
        zq1 * zq2 * z0 / ((zg + zq2) * (zg + z0))
    };
    Ok(network * spatial)
}

/// Exchange coupling from trans-impedance samples at the two qubit
/// frequencies:
///
/// `J = -1/4 sqrt(omega_i omega_j / (L_i L_j)) Im[Z(omega_i)/omega_i + Z(omega_j)/omega_j]`.
pub fn coupling_from_impedance(
    z_at_omega_i: Complex64,
    z_at_omega_j: Complex64,
    omega_i: f64,
    omega_j: f64,
    l_i: f64,
    l_j: f64,
) -> Result<f64> {
    for (name, v) in [("omega_i", omega_i), ("omega_j", omega_j), ("L_i", l_i), ("L_j", l_j)] {
        if !(v > 0.0) || !v.is_finite() {
            return Err(Error::invalid(format!("{name} must be positive, got {v}")));
        }
    }
    Ok(-0.25
        * (omega_i * omega_j / (l_i * l_j)).sqrt()
        * (z_at_omega_i.im / omega_i + z_at_omega_j.im / omega_j))
}

/// Effective qubit-waveguide coupling rate:
///
/// `g = (C_g'/2) sqrt(omega_q |Z0(delta0)| / C_q) v / sqrt(K0(delta0/delta_p))`.
///
/// The magnitude of the imaginary impedance enters the square root, and the
/// radial-mode normalization at the interaction length is folded in so that
/// the exchange coupling built from this `g` carries the profile
/// `K0(d/delta_p)/K0(delta0/delta_p)` — identically what the trans-impedance
/// route produces.
pub fn waveguide_g(
    c_g_per_len: f64,
    omega_q: f64,
    z0: Complex64,
    c_q: f64,
    v: f64,
    delta0: f64,
    delta_p: f64,
) -> Result<f64> {
    if !(c_g_per_len >= 0.0) || !c_g_per_len.is_finite() {
        return Err(Error::invalid(format!("C_g' must be >= 0, got {c_g_per_len}")));
    }
    for (name, x) in [
        ("omega_q", omega_q),
        ("C_q", c_q),
        ("v", v),
        ("delta0", delta0),
        ("delta_p", delta_p),
    ] {
        if !(x > 0.0) || !x.is_finite() {
            return Err(Error::invalid(format!("{name} must be positive, got {x}")));
        }
    }
    let k_ref = specfun::k0(delta0 / delta_p)?;
    if k_ref == 0.0 {
        return Err(Error::domain(format!(
            "radial-mode normalization underflows at delta0/delta_p = {}",
            delta0 / delta_p
        )));
    }
    let g0 = 0.5 * c_g_per_len * (omega_q * z0.norm() / c_q).sqrt() * v;
    Ok(g0 / k_ref.sqrt())
}

/// Result of fitting a penetration depth to a normalized profile.
#[derive(Debug, Clone, Copy)]
pub struct DepthFit {
    /// Best-fit penetration depth, m.
    pub delta_p: f64,
    /// RMS of the log-residuals at the optimum.
    pub rms_log_residual: f64,
    /// False when the input couplings were not strictly decreasing.
    pub monotone_input: bool,
}

/// Fits `delta_p` to a normalized profile by least squares of `ln Gamma`
/// against `ln(K0(d/delta)/K0(d_ref/delta))`, scanning a broad log-spaced
/// grid and refining by golden-section search. Needs at least 3 distinct
/// distances; a non-monotone profile is fitted anyway and flagged.
pub fn fit_penetration_depth(profile: &CrosstalkProfile) -> Result<DepthFit> {
    let entries = &profile.entries;
    let mut distinct = 0usize;
    for (i, e) in entries.iter().enumerate() {
        if i == 0 || (e.d - entries[i - 1].d).abs() > 1e-12 * e.d {
            distinct += 1;
        }
    }
    if distinct < 3 {
        return Err(Error::invalid(format!(
            "depth fit needs at least 3 distinct distances, got {distinct}"
        )));
    }
    let d_ref = entries[0].d;
    let logs: Vec<(f64, f64)> = entries.iter().map(|e| (e.d, e.gamma.ln())).collect();

    let sse = |delta: f64| -> f64 {
        let ref_log = specfun::ln_k0(d_ref / delta).unwrap();
        logs.iter()
            .map(|&(d, lg)| {
                let model = specfun::ln_k0(d / delta).unwrap() - ref_log;
                (lg - model) * (lg - model)
            })
            .sum()
    };

    let d_min = entries[0].d;
    let d_max = entries.last().unwrap().d;
    let lo = (d_min / 50.0).ln();
    let hi = (d_max * 20.0).ln();
    let grid_points = 96;
    let mut best_idx = 0usize;
    let mut best_val = f64::INFINITY;
    for i in 0..grid_points {
        let t = i as f64 / (grid_points - 1) as f64;
        let delta = (lo + t * (hi - lo)).exp();
        let v = sse(delta);
        if v < best_val {
            best_val = v;
            best_idx = i;
        }
    }
    let step = (hi - lo) / (grid_points - 1) as f64;
    let mut a = lo + step * (best_idx.saturating_sub(1)) as f64;
    let mut b = lo + step * ((best_idx + 1).min(grid_points - 1)) as f64;

    // Golden-section refine on ln(delta).
    let phi = (5.0f64.sqrt() - 1.0) / 2.0;
    let mut x1 = b - phi * (b - a);
    let mut x2 = a + phi * (b - a);
    let mut f1 = sse(x1.exp());
    let mut f2 = sse(x2.exp());
    for _ in 0..200 {
        if (b - a).abs() < 1e-12 {
            break;
        }
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - phi * (b - a);
            f1 = sse(x1.exp());
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + phi * (b - a);
            f2 = sse(x2.exp());
        }
    }
    let delta = (0.5 * (a + b)).exp();
    let rms = (sse(delta) / entries.len() as f64).sqrt();
    Ok(DepthFit {
        delta_p: delta,
        rms_log_residual: rms,
        monotone_input: profile.is_monotone(),
    })
}
