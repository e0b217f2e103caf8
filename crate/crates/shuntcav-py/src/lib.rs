//! Python bindings for the shunted-enclosure models.
//!
//! The module mirrors the CLI's unit conventions — lengths in mm,
//! frequencies in GHz — and keeps the surface small: the enclosure
//! geometry with its shifted mode spectrum, the coupled-cavity mesh
//! frequencies, and the two fitters. Everything heavier (the
//! finite-difference oracle, sweeps, field maps) stays behind the
//! command-line tool.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use shuntcav::circuit::{
    closed_form_frequencies, fit_circuit_params, numeric_mode_frequencies, BoundaryCase,
    CoupledCavityCircuit, NeighbourOrder,
};
use shuntcav::crosstalk::{fit_penetration_depth, CrosstalkProfile, ProfileEntry};
use shuntcav::model::{enclosure_from_json, enclosure_to_json, EnclosureSpec};
use shuntcav::spectra::{plasma_frequency, shifted_spectrum, PLASMA_VALIDITY_RATIO};
use shuntcav::specfun;

const MM: f64 = 1e-3;
const GHZ: f64 = 1e9;

// Invalid/Domain are bad arguments; Solver/Fit are runtime failures.
fn to_py(e: shuntcav::Error) -> PyErr {
    match e {
        shuntcav::Error::Invalid(_) | shuntcav::Error::Domain(_) => {
            PyValueError::new_err(e.to_string())
        }
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn boundary_case(name: &str) -> PyResult<BoundaryCase> {
    match name {
        "zero" => Ok(BoundaryCase::Zero),
        "equal" => Ok(BoundaryCase::EqualToCoupling),
        "twice" => Ok(BoundaryCase::TwiceCoupling),
        other => Err(PyValueError::new_err(format!(
            "boundary must be zero, equal or twice, got {other:?}"
        ))),
    }
}

/// Shunted enclosure: a dielectric-filled box whose top and bottom walls
/// are tied together by a square lattice of conducting posts.
#[pyclass(module = "shuntcav_py")]
#[derive(Clone)]
struct Enclosure {
    spec: EnclosureSpec,
}

#[pymethods]
impl Enclosure {
    /// Uniform-fill enclosure. `shunts` is the lattice extent (columns, rows);
    /// `r_mm = 0` describes the bare cavity.
    #[new]
    #[pyo3(signature = (lx_mm, ly_mm, lz_mm, eps_r, a_mm, r_mm, shunts))]
    fn new(
        lx_mm: f64,
        ly_mm: f64,
        lz_mm: f64,
        eps_r: f64,
        a_mm: f64,
        r_mm: f64,
        shunts: (usize, usize),
    ) -> PyResult<Self> {
        let spec = EnclosureSpec::uniform(
            lx_mm * MM,
            ly_mm * MM,
            lz_mm * MM,
            eps_r,
            a_mm * MM,
            r_mm * MM,
            shunts,
        );
        spec.check().map_err(to_py)?;
        Ok(Enclosure { spec })
    }

    /// Parses the same JSON document the command-line tool accepts.
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let spec = enclosure_from_json(text).map_err(to_py)?;
        Ok(Enclosure { spec })
    }

    /// Serializes back to the CLI's JSON schema.
    fn to_json(&self) -> String {
        enclosure_to_json(&self.spec)
    }

    /// Thickness-weighted harmonic-mean permittivity of the stack.
    fn eps_effective(&self) -> PyResult<f64> {
        self.spec.eps_effective().map_err(to_py)
    }

    /// Cutoff of the shunt lattice, GHz. Zero for the bare cavity.
    fn plasma_frequency_ghz(&self) -> PyResult<f64> {
        let eps = self.spec.eps_effective().map_err(to_py)?;
        plasma_frequency(self.spec.shunt_spacing, self.spec.shunt_radius, eps)
            .map(|f| f / GHZ)
            .map_err(to_py)
    }

    /// The `k` lowest cutoff-shifted modes as `(n, m, l, f_ghz)`, ascending.
    fn modes_ghz(&self, k: usize) -> PyResult<Vec<(u32, u32, u32, f64)>> {
        let shifted = shifted_spectrum(&self.spec, k).map_err(to_py)?;
        Ok(shifted
            .spectrum
            .entries()
            .iter()
            .map(|(idx, f)| (idx.n, idx.m, idx.l, f / GHZ))
            .collect())
    }

    /// True when `r/a` is past the thin-post model's trustworthy range.
    fn beyond_validity(&self) -> bool {
        self.spec.shunt_radius > 0.0
            && self.spec.shunt_radius >= PLASMA_VALIDITY_RATIO * self.spec.shunt_spacing
    }

    fn __repr__(&self) -> String {
        format!(
            "Enclosure({:.6}x{:.6}x{:.6} mm, a={:.6} mm, r={:.6} mm, {}x{} shunts)",
            self.spec.lx / MM,
            self.spec.ly / MM,
            self.spec.lz / MM,
            self.spec.shunt_spacing / MM,
            self.spec.shunt_radius / MM,
            self.spec.shunt_counts.0,
            self.spec.shunt_counts.1,
        )
    }
}

/// Parameter fit of a coupled-cavity mesh to observed mode frequencies.
#[pyclass(module = "shuntcav_py")]
struct CircuitFitResult {
    /// Fitted isolated-cell frequency, GHz.
    #[pyo3(get)]
    f0_ghz: f64,
    /// Fitted nearest-neighbor coupling ratio.
    #[pyo3(get)]
    beta: f64,
    /// Fitted second-neighbor coupling ratio (0 for order 1).
    #[pyo3(get)]
    beta1: f64,
    /// Mean relative deviation of the fitted model from the observation.
    #[pyo3(get)]
    nre: f64,
    #[pyo3(get)]
    converged: bool,
    #[pyo3(get)]
    evaluations: usize,
}

#[pymethods]
impl CircuitFitResult {
    fn __repr__(&self) -> String {
        format!(
            "CircuitFitResult(f0_ghz={:.9}, beta={:.9}, beta1={:.9}, nre={:.3e})",
            self.f0_ghz, self.beta, self.beta1, self.nre
        )
    }
}

/// Penetration-depth fit of a normalized coupling profile.
#[pyclass(module = "shuntcav_py")]
struct DepthFitResult {
    /// Best-fit penetration depth, mm.
    #[pyo3(get)]
    delta_p_mm: f64,
    /// RMS of the log-residuals at the optimum.
    #[pyo3(get)]
    rms_log_residual: f64,
    /// False when the input couplings were not strictly decreasing.
    #[pyo3(get)]
    monotone_input: bool,
}

#[pymethods]
impl DepthFitResult {
    fn __repr__(&self) -> String {
        format!(
            "DepthFitResult(delta_p_mm={:.9}, rms_log_residual={:.3e}, monotone_input={})",
            self.delta_p_mm,
            self.rms_log_residual,
            if self.monotone_input { "True" } else { "False" }
        )
    }
}

/// Constant term of the thin-post lattice cutoff's log expansion.
#[pyfunction]
fn lattice_pi() -> f64 {
    specfun::lattice_pi()
}

/// Modified Bessel function of the second kind, order 0.
#[pyfunction]
fn bessel_k0(x: f64) -> PyResult<f64> {
    specfun::k0(x).map_err(to_py)
}

/// Modified Bessel function of the second kind, order 1.
#[pyfunction]
fn bessel_k1(x: f64) -> PyResult<f64> {
    specfun::k1(x).map_err(to_py)
}

/// Mode frequencies of an `n x m` coupled-cavity mesh, GHz, ascending.
///
/// `boundary` is the rim inductance relative to the coupling one
/// (`"zero"`, `"equal"`, `"twice"`); `engine` is `"numeric"`
/// (eigendecomposition, any parameters) or `"closed"` (analytic, requires
/// `beta1 = 0`).
#[pyfunction]
#[pyo3(signature = (n, m, f0_ghz, beta, beta1 = 0.0, boundary = "equal", engine = "numeric"))]
fn circuit_frequencies_ghz(
    n: usize,
    m: usize,
    f0_ghz: f64,
    beta: f64,
    beta1: f64,
    boundary: &str,
    engine: &str,
) -> PyResult<Vec<f64>> {
    let case = boundary_case(boundary)?;
    let circ =
        CoupledCavityCircuit::from_couplings(n, m, f0_ghz * GHZ, beta, beta1, case).map_err(to_py)?;
    let spectrum = match engine {
        "numeric" => numeric_mode_frequencies(&circ).map_err(to_py)?,
        "closed" => closed_form_frequencies(&circ, case).map_err(to_py)?,
        other => {
            return Err(PyValueError::new_err(format!(
                "engine must be numeric or closed, got {other:?}"
            )))
        }
    };
    Ok(spectrum.frequencies().iter().map(|f| f / GHZ).collect())
}

/// Fits `(f0, beta[, beta1])` of a wall-shorted `n x m` mesh to observed
/// mode frequencies in GHz. `order = 1` pins the second-neighbor coupling
/// to zero; `order = 2` frees it.
#[pyfunction]
#[pyo3(signature = (observed_ghz, n, m, order = 2))]
fn fit_circuit(observed_ghz: Vec<f64>, n: usize, m: usize, order: u8) -> PyResult<CircuitFitResult> {
    let order = match order {
        1 => NeighbourOrder::One,
        2 => NeighbourOrder::Two,
        other => {
            return Err(PyValueError::new_err(format!(
                "order must be 1 or 2, got {other}"
            )))
        }
    };
    let observed_hz: Vec<f64> = observed_ghz.iter().map(|f| f * GHZ).collect();
    let fit = fit_circuit_params(&observed_hz, n, m, order).map_err(to_py)?;
    Ok(CircuitFitResult {
        f0_ghz: fit.f0 / GHZ,
        beta: fit.beta,
        beta1: fit.beta1,
        nre: fit.nre,
        converged: fit.converged,
        evaluations: fit.evaluations,
    })
}

/// Fits the penetration depth to a coupling profile normalized to its
/// first distance: `d_mm` strictly increasing, `gamma[0] = 1`.
#[pyfunction]
fn fit_depth(d_mm: Vec<f64>, gamma: Vec<f64>) -> PyResult<DepthFitResult> {
    if d_mm.len() != gamma.len() {
        return Err(PyValueError::new_err(format!(
            "d_mm and gamma lengths differ: {} vs {}",
            d_mm.len(),
            gamma.len()
        )));
    }
    let entries: Vec<ProfileEntry> = d_mm
        .iter()
        .zip(&gamma)
        .enumerate()
        .map(|(i, (d, g))| ProfileEntry {
            j: (i + 1) as u32,
            d: d * MM,
            gamma: *g,
            gamma_exp: *g,
        })
        .collect();
    let profile = CrosstalkProfile::new(entries, 0.0).map_err(to_py)?;
    let fit = fit_penetration_depth(&profile).map_err(to_py)?;
    Ok(DepthFitResult {
        delta_p_mm: fit.delta_p / MM,
        rms_log_residual: fit.rms_log_residual,
        monotone_input: fit.monotone_input,
    })
}

#[pymodule]
pub fn shuntcav_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Enclosure>()?;
    m.add_class::<CircuitFitResult>()?;
    m.add_class::<DepthFitResult>()?;
    m.add_function(wrap_pyfunction!(lattice_pi, m)?)?;
    m.add_function(wrap_pyfunction!(bessel_k0, m)?)?;
    m.add_function(wrap_pyfunction!(bessel_k1, m)?)?;
    m.add_function(wrap_pyfunction!(circuit_frequencies_ghz, m)?)?;
    m.add_function(wrap_pyfunction!(fit_circuit, m)?)?;
    m.add_function(wrap_pyfunction!(fit_depth, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
