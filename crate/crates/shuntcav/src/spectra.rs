//! Mode spectra of shunted enclosures: bare rectangular-box modes, the
//! boundary-model cutoff of the shunt lattice, and the plasma-like
//! dispersion the lattice imposes on every propagating mode.
//!
//! The lattice of inductive posts acts on the fundamental-height modes of
//! the enclosure exactly like a plasma acts on light: below a cutoff
//! frequency `f_p` nothing propagates, and above it every bare mode `f_nm`
//! is shifted to `sqrt(f_nm^2 + f_p^2)`.

use crate::constants::{C0, EPS0, MU0};
use crate::model::EnclosureSpec;
use crate::specfun::lattice_pi;
use crate::{Error, Result};

use std::cmp::Ordering;
use std::f64::consts::PI;

/// Relative tolerance within which two mode frequencies count as one
/// degenerate group.
pub const DEGENERACY_RTOL: f64 = 1e-9;

/// Index triple of a rectangular-box mode. At most one of `n, m, l` may be
/// zero (two zeros force vanishing fields); enclosure spectra in this crate
/// use the `l = 0` plane, where both `n` and `m` must be positive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ModeIndex {
    pub n: u32,
    pub m: u32,
    pub l: u32,
}

impl ModeIndex {
    pub fn new(n: u32, m: u32, l: u32) -> Result<Self> {
        let idx = ModeIndex { n, m, l };
        if idx.zero_count() > 1 {
            return Err(Error::invalid(format!(
                "mode ({n},{m},{l}) has more than one zero index; its fields vanish identically"
            )));
        }
        Ok(idx)
    }

    fn zero_count(&self) -> usize {
        [self.n, self.m, self.l].iter().filter(|&&v| v == 0).count()
    }
}

/// A frequency-sorted list of labeled modes. Ascending in frequency, with
/// exact ties broken by lexicographic label order so that the listing is
/// deterministic.
#[derive(Debug, Clone)]
pub struct ModeSpectrum<L: Copy + Ord> {
    entries: Vec<(L, f64)>,
}

impl<L: Copy + Ord> ModeSpectrum<L> {
    pub fn from_entries(mut entries: Vec<(L, f64)>) -> Self {
        entries.sort_by(|a, b| match a.1.partial_cmp(&b.1).unwrap_or(Ordering::Equal) {
            Ordering::Equal => a.0.cmp(&b.0),
            other => other,
        });
        ModeSpectrum { entries }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[(L, f64)] {
        &self.entries
    }

    pub fn frequencies(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.1).collect()
    }

    /// Groups consecutive entries whose frequencies agree within `rtol`
    /// (chained: each member is compared to the previous one). Returns
    /// index groups into `entries()`.
    pub fn degeneracy_groups(&self, rtol: f64) -> Vec<Vec<usize>> {
        let mut groups: Vec<Vec<usize>> = Vec::new();
        for (i, e) in self.entries.iter().enumerate() {
            match groups.last_mut() {
                Some(group) => {
                    let prev = self.entries[*group.last().unwrap()].1;
                    let scale = prev.abs().max(e.1.abs()).max(f64::MIN_POSITIVE);
                    if (e.1 - prev).abs() <= rtol * scale {
                        group.push(i);
                    } else {
                        groups.push(vec![i]);
                    }
                }
                None => groups.push(vec![i]),
            }
        }
        groups
    }
}

/// Cutoff band of a shunt lattice: the plasma frequency, the permittivity
/// it lives in, and the matching plasma wavenumber
/// `k_p = sqrt(eps0 eps_r mu0) * 2 pi f_p`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlasmaBand {
    /// Plasma (cutoff) frequency, Hz.
    pub f_p: f64,
    /// Relative permittivity of the medium the lattice is embedded in.
    pub eps_r: f64,
    /// Plasma wavenumber, rad/m.
    pub k_p: f64,
}

impl PlasmaBand {
    pub fn new(f_p: f64, eps_r: f64) -> Result<Self> {
        if !(f_p > 0.0) || !f_p.is_finite() {
            return Err(Error::invalid(format!("plasma frequency must be positive, got {f_p}")));
        }
        if !(eps_r >= 1.0) {
            return Err(Error::invalid(format!("relative permittivity must be >= 1, got {eps_r}")));
        }
        Ok(PlasmaBand {
            f_p,
            eps_r,
            k_p: (EPS0 * eps_r * MU0).sqrt() * 2.0 * PI * f_p,
        })
    }
}

/// Resonance of the rectangular mode `(n, m, l)` of a box `lx x ly x lz`
/// filled with the enclosure's effective permittivity:
///
/// `f = c / (2 sqrt(eps_eff)) * sqrt((n/lx)^2 + (m/ly)^2 + (l/lz)^2)`.
pub fn rect_mode_frequency(idx: ModeIndex, spec: &EnclosureSpec) -> Result<f64> {
    if idx.zero_count() > 1 {
        return Err(Error::invalid(format!(
            "mode ({},{},{}) has more than one zero index",
            idx.n, idx.m, idx.l
        )));
    }
    spec.check()?;
    let eps = spec.eps_effective()?;
    let gx = idx.n as f64 / spec.lx;
    let gy = idx.m as f64 / spec.ly;
    let gz = idx.l as f64 / spec.lz;
    Ok(C0 / (2.0 * eps.sqrt()) * (gx * gx + gy * gy + gz * gz).sqrt())
}

/// Cutoff frequency of the boundary model: a unit cell of the shunt
/// lattice behaves as a transmission line shorted at pitch `a`, giving
///
/// `f_a = 1 / (a sqrt(2 eps0 eps_r mu0))`.
///
/// Equivalently `f_a * a * sqrt(2 eps_r) = c`.
pub fn boundary_model_cutoff(a: f64, eps_r: f64) -> Result<f64> {
    if !(a > 0.0) || !a.is_finite() {
        return Err(Error::invalid(format!("lattice pitch must be positive, got {a}")));
    }
    if !(eps_r >= 1.0) {
        return Err(Error::invalid(format!("relative permittivity must be >= 1, got {eps_r}")));
    }
    Ok(1.0 / (a * (2.0 * EPS0 * eps_r * MU0).sqrt()))
}

/// Plasma frequency of an infinite square lattice of conducting posts of
/// radius `r` at pitch `a` in a medium of permittivity `eps_r`:
///
/// `f_p = f_a / sqrt(pi * (ln(a/r) - PI_lattice))`,
///
/// with `f_a` the boundary-model cutoff and `PI_lattice` the lattice
/// constant [`lattice_pi`]. `r = 0` means no posts and returns 0.
///
/// The thin-post expansion loses meaning once `ln(a/r)` approaches the
/// lattice constant; `r >= a*exp(-PI_lattice)` (about `0.27 a`) is a hard
/// domain error. Validity is already strained for `r/a >= 0.1`; use
/// [`shifted_spectrum`] to get that flagged.
pub fn plasma_frequency(a: f64, r: f64, eps_r: f64) -> Result<f64> {
    if r <= 0.0 {
        return Ok(0.0);
    }
    if !(a > 0.0) || !a.is_finite() || !r.is_finite() {
        return Err(Error::invalid(format!(
            "lattice pitch must be positive and radii finite, got a = {a}, r = {r}"
        )));
    }
    let pi_lat = lattice_pi();
    let log_term = (a / r).ln() - pi_lat;
    if log_term <= 0.0 {
        return Err(Error::domain(format!(
            "post radius {r} is at or beyond the thin-post limit r < a*exp(-{pi_lat:.6}) = {:.6e}",
            a * (-pi_lat).exp()
        )));
    }
    let f_a = boundary_model_cutoff(a, eps_r)?;
    Ok(f_a / (PI * log_term).sqrt())
}

/// Ratio `r/a` above which the thin-post plasma model is marked as
/// extrapolating beyond its validity.
pub const PLASMA_VALIDITY_RATIO: f64 = 0.1;

/// Plasma-shifted mode spectrum of an enclosure.
#[derive(Debug, Clone)]
pub struct ShiftedSpectrum {
    /// The `k` lowest shifted modes, ascending.
    pub spectrum: ModeSpectrum<ModeIndex>,
    /// Plasma frequency of the shunt lattice (0 without shunts), Hz.
    pub f_p: f64,
    /// Effective permittivity used throughout.
    pub eps_eff: f64,
    /// True when `r/a >= 0.1`: values are reported but the thin-post model
    /// is beyond its trustworthy range.
    pub beyond_validity: bool,
}

/// The `k` lowest fundamental-height (`l = 0`) modes of the enclosure with
/// every bare mode shifted by the lattice plasma frequency:
///
/// `f'_nm = sqrt(f_nm^2 + f_p^2)`.
///
/// With `shunt_radius = 0` this is the bare spectrum. Frequencies ascend;
/// exact degeneracies keep lexicographic index order.
pub fn shifted_spectrum(spec: &EnclosureSpec, k: usize) -> Result<ShiftedSpectrum> {
    if k == 0 {
        return Err(Error::invalid("requested zero modes"));
    }
    spec.check()?;
    let eps = spec.eps_effective()?;
    let f_p = plasma_frequency(spec.shunt_spacing, spec.shunt_radius, eps)?;
    let beyond_validity =
        spec.shunt_radius > 0.0 && spec.shunt_radius >= PLASMA_VALIDITY_RATIO * spec.shunt_spacing;

    // Enumerate bare l = 0 modes inside an index box, growing the box until
    // the k-th smallest frequency provably lies inside it: every mode
    // outside the box is at least as high as the cheapest boundary mode.
    let base = C0 / (2.0 * eps.sqrt());
    let bare = |n: u32, m: u32| -> f64 {
        let gx = n as f64 / spec.lx;
        let gy = m as f64 / spec.ly;
        base * (gx * gx + gy * gy).sqrt()
    };

    let mut nbox = ((k as f64).sqrt().ceil() as u32 + 1).max(2);
    let entries = loop {
        let mut entries: Vec<(ModeIndex, f64)> = Vec::with_capacity((nbox * nbox) as usize);
        for n in 1..=nbox {
            for m in 1..=nbox {
                entries.push((ModeIndex { n, m, l: 0 }, bare(n, m)));
            }
        }
        entries.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap());
        let cheapest_outside = bare(nbox + 1, 1).min(bare(1, nbox + 1));
        if entries.len() >= k && entries[k - 1].1 <= cheapest_outside {
            entries.truncate(k);
            break entries;
        }
        nbox *= 2;
    };

    let shifted: Vec<(ModeIndex, f64)> = entries
        .into_iter()
        .map(|(idx, f)| (idx, (f * f + f_p * f_p).sqrt()))
        .collect();

    Ok(ShiftedSpectrum {
        spectrum: ModeSpectrum::from_entries(shifted),
        f_p,
        eps_eff: eps,
        beyond_validity,
    })
}

/// Effective relative permittivity a plasma presents at frequency `f`:
/// `eps_p = 1 - (f_p/f)^2`. Negative below the plasma frequency (evanescent
/// propagation), zero at it, approaching 1 far above.
pub fn plasma_permittivity(f: f64, f_p: f64) -> Result<f64> {
    if !(f > 0.0) || !f.is_finite() {
        return Err(Error::invalid(format!("frequency must be positive, got {f}")));
    }
    if !(f_p >= 0.0) || !f_p.is_finite() {
        return Err(Error::invalid(format!("plasma frequency must be >= 0, got {f_p}")));
    }
    let ratio = f_p / f;
    Ok(1.0 - ratio * ratio)
}

/// Small-k plasma dispersion: `f(k) = f_p (1 + k^2 / (2 k_p^2))`, the
/// quadratic expansion of `f = sqrt(f_p^2 + (k c')^2/(2 pi)^2)` around the
/// band bottom. Exact at `k = 0`; within 1% of the exact branch for
/// `k <= 0.2 k_p`.
pub fn plasma_dispersion(k: f64, band: &PlasmaBand) -> f64 {
    let ratio = k / band.k_p;
    band.f_p * (1.0 + 0.5 * ratio * ratio)
}

/// Exact dispersion branch `f(k) = sqrt(f_p^2 + (k/(2 pi sqrt(eps mu)))^2)`
/// that [`plasma_dispersion`] expands; exposed for comparisons.
pub fn plasma_dispersion_exact(k: f64, band: &PlasmaBand) -> f64 {
    let v = 1.0 / (EPS0 * band.eps_r * MU0).sqrt();
    let f_free = k * v / (2.0 * PI);
    (band.f_p * band.f_p + f_free * f_free).sqrt()
}
