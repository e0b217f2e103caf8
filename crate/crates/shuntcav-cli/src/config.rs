//! Geometry sources shared by the subcommands: either a JSON enclosure
//! file or explicit flags, never a mix.

use clap::Args;
use shuntcav::model::{enclosure_from_json, enclosure_to_json, EnclosureSpec};
use shuntcav::{Error, Result};
use std::path::{Path, PathBuf};

pub const MM: f64 = 1e-3;
pub const GHZ: f64 = 1e9;

#[derive(Debug, Clone, Args)]
pub struct GeomArgs {
    /// Enclosure length along x, mm
    #[arg(long = "lx-mm", value_name = "MM")]
    pub lx_mm: Option<f64>,
    /// Enclosure length along y, mm
    #[arg(long = "ly-mm", value_name = "MM")]
    pub ly_mm: Option<f64>,
    /// Enclosure height, mm
    #[arg(long = "lz-mm", value_name = "MM")]
    pub lz_mm: Option<f64>,
    /// Relative permittivity of a uniform fill
    #[arg(long = "eps-r", value_name = "EPS")]
    pub eps_r: Option<f64>,
    /// Shunt lattice pitch, mm
    #[arg(long = "spacing-mm", value_name = "MM")]
    pub spacing_mm: Option<f64>,
    /// Shunt post radius, mm (0 disables the lattice)
    #[arg(long = "radius-mm", value_name = "MM")]
    pub radius_mm: Option<f64>,
    /// Shunt columns (also rows unless --count-y is given)
    #[arg(long = "count", value_name = "N")]
    pub count: Option<usize>,
    /// Shunt rows
    #[arg(long = "count-y", value_name = "N")]
    pub count_y: Option<usize>,
}

impl GeomArgs {
    fn any_set(&self) -> bool {
        self.lx_mm.is_some()
            || self.ly_mm.is_some()
            || self.lz_mm.is_some()
            || self.eps_r.is_some()
            || self.spacing_mm.is_some()
            || self.radius_mm.is_some()
            || self.count.is_some()
            || self.count_y.is_some()
    }

    fn require(name: &str, v: Option<f64>) -> Result<f64> {
        v.ok_or_else(|| Error::invalid(format!("{name} is required without --config")))
    }
}

fn read_config(path: &Path) -> Result<EnclosureSpec> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::invalid(format!("cannot read {}: {e}", path.display())))?;
    enclosure_from_json(&text)
}

/// Full enclosure from `--config` or from the geometry flags.
pub fn resolve_enclosure(config: Option<&PathBuf>, g: &GeomArgs) -> Result<EnclosureSpec> {
    let spec = match config {
        Some(path) => {
            if g.any_set() {
                return Err(Error::invalid(
                    "give either --config or geometry flags, not both",
                ));
            }
            read_config(path)?
        }
        None => {
            let lx = GeomArgs::require("--lx-mm", g.lx_mm)? * MM;
            let ly = GeomArgs::require("--ly-mm", g.ly_mm)? * MM;
            let lz = GeomArgs::require("--lz-mm", g.lz_mm)? * MM;
            let eps = GeomArgs::require("--eps-r", g.eps_r)?;
            let a = g.spacing_mm.unwrap_or(0.0) * MM;
            let r = g.radius_mm.unwrap_or(0.0) * MM;
            let cx = g.count.unwrap_or(0);
            let cy = g.count_y.unwrap_or(cx);
            EnclosureSpec::uniform(lx, ly, lz, eps, a, r, (cx, cy))
        }
    };
    spec.check()?;
    Ok(spec)
}

/// Lattice-only parameters `(pitch, radius, eps)` for commands that do not
/// need the box outline. From a config file these come from the enclosure;
/// from flags only `--spacing-mm`, `--radius-mm`, and `--eps-r` are read.
pub fn resolve_lattice(
    config: Option<&PathBuf>,
    g: &GeomArgs,
    need_radius: bool,
) -> Result<(f64, f64, f64)> {
    if let Some(path) = config {
        if g.any_set() {
            return Err(Error::invalid(
                "give either --config or geometry flags, not both",
            ));
        }
        let spec = read_config(path)?;
        spec.check()?;
        return Ok((spec.shunt_spacing, spec.shunt_radius, spec.eps_effective()?));
    }
    let a = GeomArgs::require("--spacing-mm", g.spacing_mm)? * MM;
    let eps = GeomArgs::require("--eps-r", g.eps_r)?;
    let r = if need_radius {
        GeomArgs::require("--radius-mm", g.radius_mm)? * MM
    } else {
        g.radius_mm.unwrap_or(0.0) * MM
    };
    if !(a > 0.0) {
        return Err(Error::invalid(format!("lattice pitch must be positive, got {a} m")));
    }
    Ok((a, r, eps))
}

/// Canonical one-line description of an enclosure for config hashing.
pub fn describe_enclosure(spec: &EnclosureSpec) -> String {
    enclosure_to_json(spec)
}
