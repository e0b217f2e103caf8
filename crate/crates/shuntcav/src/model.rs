//! Enclosure geometry: outer box, dielectric stack, and the shunt lattice.
//!
//! All lengths are meters. The JSON interchange schema (used by the CLI and
//! the Python bindings) is in millimeters and converted at the boundary; see
//! [`enclosure_from_json`].

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Relative tolerance for requiring the dielectric stack to fill the
/// enclosure height exactly.
pub const THICKNESS_SUM_RTOL: f64 = 1e-9;

/// One dielectric layer of the vertical stack.
///
/// Layers are ordered bottom to top; only thickness and permittivity enter
/// the field problem, so the order never matters physically, but keeping it
/// fixed makes serialized specs reproducible.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DielectricLayer {
    /// Layer thickness, m. Must be positive.
    pub thickness: f64,
    /// Relative permittivity. Must be >= 1.
    pub rel_permittivity: f64,
}

impl DielectricLayer {
    pub fn new(thickness: f64, rel_permittivity: f64) -> Result<Self> {
        let layer = DielectricLayer {
            thickness,
            rel_permittivity,
        };
        layer.check()?;
        Ok(layer)
    }

    fn check(&self) -> Result<()> {
        if !(self.thickness > 0.0) || !self.thickness.is_finite() {
            return Err(Error::invalid(format!(
                "layer thickness must be positive and finite, got {}",
                self.thickness
            )));
        }
        if !(self.rel_permittivity >= 1.0) || !self.rel_permittivity.is_finite() {
            return Err(Error::invalid(format!(
                "layer relative permittivity must be >= 1, got {}",
                self.rel_permittivity
            )));
        }
        Ok(())
    }
}

/// Conducting box of size `lx x ly x lz` with a rectangular lattice of
/// inductive shunts (pitch `shunt_spacing`, post radius `shunt_radius`)
/// connecting bottom and top walls through the dielectric stack.
///
/// `shunt_radius = 0` means no shunts: the lattice is absent and every
/// shunt-dependent quantity degenerates to the bare enclosure.
#[derive(Debug, Clone, PartialEq)]
pub struct EnclosureSpec {
    /// Lateral size along x, m.
    pub lx: f64,
    /// Lateral size along y, m.
    pub ly: f64,
    /// Height, m.
    pub lz: f64,
    /// Dielectric stack, bottom to top. Thicknesses must sum to `lz`.
    pub layers: Vec<DielectricLayer>,
    /// Shunt lattice pitch, m.
    pub shunt_spacing: f64,
    /// Shunt post radius, m. Zero disables the lattice.
    pub shunt_radius: f64,
    /// Lattice extent as (columns, rows).
    pub shunt_counts: (usize, usize),
}

impl EnclosureSpec {
    /// Enclosure with a single uniform dielectric fill.
    pub fn uniform(
        lx: f64,
        ly: f64,
        lz: f64,
        eps_r: f64,
        shunt_spacing: f64,
        shunt_radius: f64,
        shunt_counts: (usize, usize),
    ) -> Self {
        EnclosureSpec {
            lx,
            ly,
            lz,
            layers: vec![DielectricLayer {
                thickness: lz,
                rel_permittivity: eps_r,
            }],
            shunt_spacing,
            shunt_radius,
            shunt_counts,
        }
    }

    /// Thickness-weighted series (harmonic) effective permittivity of the
    /// stack; see [`effective_permittivity`].
    pub fn eps_effective(&self) -> Result<f64> {
        effective_permittivity(&self.layers, self.lz)
    }

    /// Validates every structural invariant; `Err` carries the first
    /// violation. Use [`validate_enclosure`] for the full report.
    pub fn check(&self) -> Result<()> {
        let report = validate_enclosure(self);
        match report.violations.first() {
            None => Ok(()),
            Some(v) => Err(Error::invalid(v.clone())),
        }
    }
}

/// Effective permittivity of a layered stack of total height `lz`: the
/// field is vertical and continuous displacement across layer interfaces
/// puts the layers in series, so
/// `eps_eff = lz / sum(thickness_i / eps_i)`.
///
/// This is the harmonic (thickness-weighted) mean; it never exceeds the
/// arithmetic mean and is invariant under reordering or splitting layers.
pub fn effective_permittivity(layers: &[DielectricLayer], lz: f64) -> Result<f64> {
    if layers.is_empty() {
        return Err(Error::invalid("dielectric stack is empty"));
    }
    if !(lz > 0.0) || !lz.is_finite() {
        return Err(Error::invalid(format!(
            "stack height must be positive and finite, got {lz}"
        )));
    }
    let mut sum_t = 0.0;
    let mut sum_t_over_eps = 0.0;
    for layer in layers {
        layer.check()?;
        sum_t += layer.thickness;
        sum_t_over_eps += layer.thickness / layer.rel_permittivity;
    }
    if ((sum_t - lz) / lz).abs() > THICKNESS_SUM_RTOL {
        return Err(Error::invalid(format!(
            "layer thickness sum {sum_t} does not match enclosure height {lz}"
        )));
    }
    Ok(lz / sum_t_over_eps)
}

/// Outcome of structural validation: an empty violation list means the spec
/// is usable by every solver in the crate.
#[derive(Debug, Clone, Default)]
pub struct ValidationReport {
    pub violations: Vec<String>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks an enclosure spec against all structural invariants and reports
/// every violation found (rather than stopping at the first):
///
/// - box dimensions positive,
/// - layers individually valid and summing to `lz`,
/// - `0 <= shunt_radius < shunt_spacing / 2` (posts must not touch),
/// - the shunt lattice footprint fits inside the box.
pub fn validate_enclosure(spec: &EnclosureSpec) -> ValidationReport {
    let mut report = ValidationReport::default();
    let mut push = |msg: String| report.violations.push(msg);

    for (name, v) in [("lx", spec.lx), ("ly", spec.ly), ("lz", spec.lz)] {
        if !(v > 0.0) || !v.is_finite() {
            push(format!("{name} must be positive and finite, got {v}"));
        }
    }

    if spec.layers.is_empty() {
        push("dielectric stack is empty".to_string());
    }
    let mut sum_t = 0.0;
    for (i, layer) in spec.layers.iter().enumerate() {
        if let Err(e) = layer.check() {
            push(format!("layer {i}: {e}"));
        }
        sum_t += layer.thickness;
    }
    if spec.lz > 0.0 && !spec.layers.is_empty() && ((sum_t - spec.lz) / spec.lz).abs() > THICKNESS_SUM_RTOL {
        push(format!(
            "layer thickness sum {} does not match enclosure height {} (violates thickness sum = lz)",
            sum_t, spec.lz
        ));
    }

    let a = spec.shunt_spacing;
    let r = spec.shunt_radius;
    let (ncx, ncy) = spec.shunt_counts;
    let has_lattice = r > 0.0 && ncx > 0 && ncy > 0;

    if r < 0.0 || !r.is_finite() {
        push(format!("shunt radius must be >= 0 and finite, got {r}"));
    }
    if has_lattice {
        if !(a > 0.0) || !a.is_finite() {
            push(format!("shunt spacing must be positive and finite, got {a}"));
        } else {
            if !(r < 0.5 * a) {
                push(format!(
                    "shunt radius {r} violates r < a/2 for spacing {a} (adjacent posts touch)"
                ));
            }
            // Footprint of the lattice (outermost post surfaces) must stay
            // inside the box walls.
            let fx = (ncx - 1) as f64 * a + 2.0 * r;
            let fy = (ncy - 1) as f64 * a + 2.0 * r;
            if fx > spec.lx * (1.0 + 1e-12) {
                push(format!(
                    "shunt lattice footprint {fx} along x exceeds enclosure size {}",
                    spec.lx
                ));
            }
            if fy > spec.ly * (1.0 + 1e-12) {
                push(format!(
                    "shunt lattice footprint {fy} along y exceeds enclosure size {}",
                    spec.ly
                ));
            }
        }
    }

    report
}

// --- JSON interchange schema (mm units) -------------------------------------

#[derive(Debug, Serialize, Deserialize)]
struct LayerJson {
    t_mm: f64,
    eps_r: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct EnclosureJson {
    lx_mm: f64,
    ly_mm: f64,
    lz_mm: f64,
    layers: Vec<LayerJson>,
    a_mm: f64,
    r_mm: f64,
    shunts: [usize; 2],
}

const MM: f64 = crate::constants::MM;

/// Parses the millimeter-unit JSON description of an enclosure:
///
/// ```json
/// {
///   "lx_mm": 42.0, "ly_mm": 42.0, "lz_mm": 0.5,
///   "layers": [{"t_mm": 0.5, "eps_r": 11.9}],
///   "a_mm": 2.0, "r_mm": 0.25, "shunts": [20, 20]
/// }
/// ```
///
/// The parsed spec is validated structurally before being returned.
pub fn enclosure_from_json(text: &str) -> Result<EnclosureSpec> {
    let parsed: EnclosureJson =
        serde_json::from_str(text).map_err(|e| Error::invalid(format!("bad enclosure JSON: {e}")))?;
    let spec = EnclosureSpec {
        lx: parsed.lx_mm * MM,
        ly: parsed.ly_mm * MM,
        lz: parsed.lz_mm * MM,
        layers: parsed
            .layers
            .iter()
            .map(|l| DielectricLayer {
                thickness: l.t_mm * MM,
                rel_permittivity: l.eps_r,
            })
            .collect(),
        shunt_spacing: parsed.a_mm * MM,
        shunt_radius: parsed.r_mm * MM,
        shunt_counts: (parsed.shunts[0], parsed.shunts[1]),
    };
    spec.check()?;
    Ok(spec)
}

/// Serializes an enclosure spec to the millimeter-unit JSON schema.
pub fn enclosure_to_json(spec: &EnclosureSpec) -> String {
    let doc = EnclosureJson {
        lx_mm: spec.lx / MM,
        ly_mm: spec.ly / MM,
        lz_mm: spec.lz / MM,
        layers: spec
            .layers
            .iter()
            .map(|l| LayerJson {
                t_mm: l.thickness / MM,
                eps_r: l.rel_permittivity,
            })
            .collect(),
        a_mm: spec.shunt_spacing / MM,
        r_mm: spec.shunt_radius / MM,
        shunts: [spec.shunt_counts.0, spec.shunt_counts.1],
    };
    serde_json::to_string_pretty(&doc).expect("enclosure JSON serialization cannot fail")
}
