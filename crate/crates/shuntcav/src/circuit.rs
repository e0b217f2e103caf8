//! Lumped mesh model of a shunt lattice: an `n x m` grid of LC cells
//! (each unit cell of the via lattice resonates at `f0 = 1/(2 pi sqrt(L0 C0))`)
//! coupled by shared inductance.
//!
//! Nearest-neighbor meshes share a coupling inductor `Lg`, next-nearest
//! meshes optionally share `Lg2`, and the chain ends terminate in a
//! boundary inductor `Lb`. Three boundary cases (`Lb = 0`, `Lb = Lg`,
//! `Lb = 2 Lg`) admit closed-form mode frequencies; everything else goes
//! through the numeric eigensolver, which also provides the fitting path
//! for spectra produced by the field oracle.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use std::f64::consts::PI;

use crate::simplex::{self, SimplexOptions};
use crate::spectra::ModeSpectrum;
use crate::{Error, Result};

/// Boundary termination of the mesh chain, expressed as a multiple of the
/// coupling inductance. These three values are the ones with closed-form
/// spectra.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryCase {
    /// `Lb = 0`: chain ends shorted directly to the wall.
    Zero,
    /// `Lb = Lg`: ends terminated like one more coupling link.
    EqualToCoupling,
    /// `Lb = 2 Lg`: ends terminated by a doubled link.
    TwiceCoupling,
}

impl BoundaryCase {
    pub fn factor(self) -> f64 {
        match self {
            BoundaryCase::Zero => 0.0,
            BoundaryCase::EqualToCoupling => 1.0,
            BoundaryCase::TwiceCoupling => 2.0,
        }
    }

    /// Mode-sum coefficient `gamma_ij` entering the closed form
    /// `f_ij = f0 / sqrt(1 + 4 beta (1 + gamma_ij/2))`.
    fn gamma(self, i: usize, j: usize, n: usize, m: usize) -> f64 {
        let (ci, cj) = match self {
            BoundaryCase::Zero => (
                (i as f64 * PI / n as f64).cos(),
                (j as f64 * PI / m as f64).cos(),
            ),
            BoundaryCase::EqualToCoupling => (
                (i as f64 * PI / (n as f64 + 1.0)).cos(),
                (j as f64 * PI / (m as f64 + 1.0)).cos(),
            ),
            BoundaryCase::TwiceCoupling => (
                ((i as f64 - 1.0) * PI / n as f64).cos(),
                ((j as f64 - 1.0) * PI / m as f64).cos(),
            ),
        };
        ci + cj
    }
}

/// Second-neighbor coupling on or off; selects the stencil of the 1D chain
/// matrices.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NeighbourOrder {
    One,
    Two,
}

/// An `n x m` grid of identical LC meshes with shared-inductor coupling.
/// All inductances in henries, capacitance in farads.
#[derive(Debug, Clone, PartialEq)]
pub struct CoupledCavityCircuit {
    pub n: usize,
    pub m: usize,
    /// Self-inductance of one mesh.
    pub l0: f64,
    /// Capacitance of one mesh.
    pub c0: f64,
    /// Nearest-neighbor shared inductance.
    pub lg: f64,
    /// Boundary inductance at chain ends.
    pub lb: f64,
    /// Next-nearest-neighbor shared inductance.
    pub lg2: f64,
}

impl CoupledCavityCircuit {
    pub fn new(n: usize, m: usize, l0: f64, c0: f64, lg: f64, lb: f64, lg2: f64) -> Result<Self> {
        if n < 1 || m < 1 {
            return Err(Error::invalid(format!("grid must be at least 1x1, got {n}x{m}")));
        }
        if !(l0 > 0.0) || !(c0 > 0.0) {
            return Err(Error::invalid(format!(
                "mesh self-inductance and capacitance must be positive, got L0 = {l0}, C0 = {c0}"
            )));
        }
        for (name, v) in [("Lg", lg), ("Lb", lb), ("Lg2", lg2)] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::invalid(format!("{name} must be >= 0 and finite, got {v}")));
            }
        }
        Ok(CoupledCavityCircuit { n, m, l0, c0, lg, lb, lg2 })
    }

    /// Builds the circuit from its dimensionless parameters: isolated-cell
    /// frequency `f0` (Hz), coupling ratios `beta = Lg/L0` and
    /// `beta1 = Lg2/L0`, and a boundary case. The absolute impedance level
    /// is arbitrary for mode frequencies; `L0` is pinned to 1 nH.
    pub fn from_couplings(
        n: usize,
        m: usize,
        f0: f64,
        beta: f64,
        beta1: f64,
        boundary: BoundaryCase,
    ) -> Result<Self> {
        if !(f0 > 0.0) || !f0.is_finite() {
            return Err(Error::invalid(format!("f0 must be positive, got {f0}")));
        }
        let l0 = 1e-9;
        let c0 = 1.0 / ((2.0 * PI * f0).powi(2) * l0);
        let lg = beta * l0;
        CoupledCavityCircuit::new(n, m, l0, c0, lg, boundary.factor() * lg, beta1 * l0)
    }

    /// Isolated-cell resonance `1/(2 pi sqrt(L0 C0))`, Hz.
    pub fn f0(&self) -> f64 {
        1.0 / (2.0 * PI * (self.l0 * self.c0).sqrt())
    }

    /// Nearest-neighbor coupling ratio `Lg/L0`.
    pub fn beta(&self) -> f64 {
        self.lg / self.l0
    }

    /// Next-nearest-neighbor coupling ratio `Lg2/L0`.
    pub fn beta1(&self) -> f64 {
        self.lg2 / self.l0
    }

    fn matches_boundary(&self, case: BoundaryCase) -> bool {
        (self.lb - case.factor() * self.lg).abs() <= 1e-12 * self.l0.max(self.lg).max(self.lb)
    }
}

/// Mesh impedance matrix at a fixed angular frequency. Symmetric with
/// purely imaginary entries (lossless network).
#[derive(Debug, Clone)]
pub struct ImpedanceMatrix {
    /// Angular frequency the matrix was evaluated at, rad/s.
    pub omega: f64,
    pub matrix: DMatrix<Complex64>,
}

impl ImpedanceMatrix {
    pub fn dimension(&self) -> usize {
        self.matrix.nrows()
    }

    /// All entries are `i * x` with real `x`; returns the real matrix `x`.
    pub fn imag_part(&self) -> DMatrix<f64> {
        self.matrix.map(|z| z.im)
    }

    /// Eigenvalues (purely imaginary), returned as their imaginary parts in
    /// ascending order.
    pub fn eigenvalues_imag(&self) -> Vec<f64> {
        let eig = SymmetricEigen::new(self.imag_part());
        let mut v: Vec<f64> = eig.eigenvalues.iter().copied().collect();
        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
        v
    }

    pub fn is_symmetric(&self) -> bool {
        let m = &self.matrix;
        for i in 0..m.nrows() {
            for j in 0..i {
                if m[(i, j)] != m[(j, i)] {
                    return false;
                }
            }
        }
        true
    }

    pub fn is_purely_imaginary(&self) -> bool {
        self.matrix.iter().all(|z| z.re == 0.0)
    }
}

/// Inductance added to a mesh's diagonal by its position along one axis.
///
/// Positional classes: chain ends carry one coupling link plus the boundary
/// inductor; the meshes one in from the ends lack one second-neighbor link.
/// (For `n = 1` the single mesh is classified as an end.)
fn axis_diag_inductance(i: usize, n: usize, order: NeighbourOrder, lg: f64, lb: f64, lg2: f64) -> f64 {
    let second_neighbour = match order {
        NeighbourOrder::One => 0.0,
        NeighbourOrder::Two => lg2,
    };
    if i == 0 || i == n - 1 {
        lg + lb + second_neighbour
    } else if i == 1 || i == n - 2 {
        2.0 * lg + second_neighbour
    } else {
        2.0 * lg + 2.0 * second_neighbour
    }
}

/// Real inductance matrix `M_L` of the 1D chain: `Z_1D(omega) =
/// i omega M_L - (i/(omega C0)) I`.
fn ml_matrix_1d(n: usize, order: NeighbourOrder, l0: f64, lg: f64, lb: f64, lg2: f64) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        m[(i, i)] = l0 + axis_diag_inductance(i, n, order, lg, lb, lg2);
        if i + 1 < n {
            m[(i, i + 1)] = -lg;
            m[(i + 1, i)] = -lg;
        }
        if order == NeighbourOrder::Two && i + 2 < n {
            m[(i, i + 2)] = -lg2;
            m[(i + 2, i)] = -lg2;
        }
    }
    m
}

/// Real inductance matrix of the 2D mesh, built entrywise: cell `(ix, iy)`
/// (row-major, x fastest) has diagonal `L0 + add_x(ix) + add_y(iy)` and
/// couples by `-Lg` to nearest and `-Lg2` to next-nearest neighbors along
/// each axis.
fn ml_matrix_2d(circ: &CoupledCavityCircuit, order: NeighbourOrder) -> DMatrix<f64> {
    let (n, m) = (circ.n, circ.m);
    let dim = n * m;
    let mut mat = DMatrix::zeros(dim, dim);
    let idx = |ix: usize, iy: usize| iy * n + ix;
    for iy in 0..m {
        for ix in 0..n {
            let p = idx(ix, iy);
            mat[(p, p)] = circ.l0
                + axis_diag_inductance(ix, n, order, circ.lg, circ.lb, circ.lg2)
                + axis_diag_inductance(iy, m, order, circ.lg, circ.lb, circ.lg2);
            if ix + 1 < n {
                let q = idx(ix + 1, iy);
                mat[(p, q)] = -circ.lg;
                mat[(q, p)] = -circ.lg;
            }
            if iy + 1 < m {
                let q = idx(ix, iy + 1);
                mat[(p, q)] = -circ.lg;
                mat[(q, p)] = -circ.lg;
            }
            if order == NeighbourOrder::Two {
                if ix + 2 < n {
                    let q = idx(ix + 2, iy);
                    mat[(p, q)] = -circ.lg2;
                    mat[(q, p)] = -circ.lg2;
                }
                if iy + 2 < m {
                    let q = idx(ix, iy + 2);
                    mat[(p, q)] = -circ.lg2;
                    mat[(q, p)] = -circ.lg2;
                }
            }
        }
    }
    mat
}

fn ml_to_impedance(ml: &DMatrix<f64>, c0: f64, omega: f64) -> DMatrix<Complex64> {
    let dim = ml.nrows();
    let mut z = DMatrix::from_element(dim, dim, Complex64::new(0.0, 0.0));
    for i in 0..dim {
        for j in 0..dim {
            let mut x = omega * ml[(i, j)];
            if i == j {
                x -= 1.0 / (omega * c0);
            }
            if x != 0.0 || i == j {
                z[(i, j)] = Complex64::new(0.0, x);
            }
        }
    }
    z
}

/// Mesh impedance matrix of the 1D chain at angular frequency `omega`.
pub fn build_z1d(circ: &CoupledCavityCircuit, omega: f64, order: NeighbourOrder) -> Result<ImpedanceMatrix> {
    if !(omega > 0.0) || !omega.is_finite() {
        return Err(Error::invalid(format!("omega must be positive, got {omega}")));
    }
    let ml = ml_matrix_1d(circ.n, order, circ.l0, circ.lg, circ.lb, circ.lg2);
    Ok(ImpedanceMatrix {
        omega,
        matrix: ml_to_impedance(&ml, circ.c0, omega),
    })
}

/// Mesh impedance matrix of the full 2D grid at angular frequency `omega`.
/// Uses the second-neighbor stencil; with `Lg2 = 0` it coincides entrywise
/// with the nearest-neighbor one.
pub fn build_z2d(circ: &CoupledCavityCircuit, omega: f64) -> Result<ImpedanceMatrix> {
    if !(omega > 0.0) || !omega.is_finite() {
        return Err(Error::invalid(format!("omega must be positive, got {omega}")));
    }
    let ml = ml_matrix_2d(circ, NeighbourOrder::Two);
    Ok(ImpedanceMatrix {
        omega,
        matrix: ml_to_impedance(&ml, circ.c0, omega),
    })
}

/// Upper bound on `n*m` for the dense numeric eigensolve.
const MAX_NUMERIC_CELLS: usize = 10_000;

/// Mode frequencies of the 2D mesh from a single symmetric
/// eigendecomposition: `Z(omega) = i omega M_L - (i/(omega C0)) I` is
/// singular exactly when `omega^2 = 1/(lambda_k C0)` for an eigenvalue
/// `lambda_k` of `M_L`, so `f_k = 1/(2 pi sqrt(lambda_k C0))`.
///
/// Works for arbitrary `Lb` and `Lg2`. Entries are labeled `(i, j)` with
/// `i, j >= 1` by rank of the per-axis chain eigenvalues; `(1, 1)` is the
/// lowest mode.
pub fn numeric_mode_frequencies(circ: &CoupledCavityCircuit) -> Result<ModeSpectrum<(usize, usize)>> {
    let (n, m) = (circ.n, circ.m);
    if n * m > MAX_NUMERIC_CELLS {
        return Err(Error::invalid(format!(
            "dense mode solve capped at {MAX_NUMERIC_CELLS} cells, got {}",
            n * m
        )));
    }

    let full = SymmetricEigen::new(ml_matrix_2d(circ, NeighbourOrder::Two));
    let mut lambdas: Vec<f64> = full.eigenvalues.iter().copied().collect();
    lambdas.sort_by(|a, b| b.partial_cmp(a).unwrap()); // descending: lowest f first
    if *lambdas.last().unwrap() <= 0.0 {
        return Err(Error::domain(
            "inductance matrix has a non-positive eigenvalue; circuit parameters are unphysical"
                .to_string(),
        ));
    }

    // Labels by rank of the per-axis chain eigenvalues. The 2D matrix is a
    // Kronecker sum, so its spectrum is exactly the pairwise sums.
    let chain = |len: usize| -> Vec<f64> {
        let eig = SymmetricEigen::new(ml_matrix_1d(len, NeighbourOrder::Two, circ.l0, circ.lg, circ.lb, circ.lg2));
        let mut v: Vec<f64> = eig.eigenvalues.iter().copied().collect();
        v.sort_by(|a, b| b.partial_cmp(a).unwrap());
        v
    };
    let xs = chain(n);
    let ys = chain(m);
    let mut pairs: Vec<((usize, usize), f64)> = Vec::with_capacity(n * m);
    for (i, &lx) in xs.iter().enumerate() {
        for (j, &ly) in ys.iter().enumerate() {
            pairs.push(((i + 1, j + 1), lx + ly - circ.l0));
        }
    }
    pairs.sort_by(|a, b| match b.1.partial_cmp(&a.1).unwrap() {
        std::cmp::Ordering::Equal => a.0.cmp(&b.0),
        other => other,
    });

    let entries: Vec<((usize, usize), f64)> = pairs
        .iter()
        .zip(lambdas.iter())
        .map(|(&(label, lam_pair), &lam_full)| {
            debug_assert!(
                (lam_pair - lam_full).abs() <= 1e-9 * lam_full.abs().max(circ.l0),
                "Kronecker-sum labeling out of step: {lam_pair} vs {lam_full}"
            );
            (label, 1.0 / (2.0 * PI * (lam_full * circ.c0).sqrt()))
        })
        .collect();

    Ok(ModeSpectrum::from_entries(entries))
}

/// Closed-form mode frequencies for one of the three analytic boundary
/// cases:
///
/// `f_ij = f0 / sqrt(1 + 4 beta (1 + gamma_ij / 2))`,
///
/// with `gamma_ij` the case's pair of cosines. Requires a nearest-neighbor
/// circuit (`Lg2 = 0`), a boundary inductance matching the case, and at
/// least 2 cells per axis (the corner-perturbation forms behind these
/// expressions degenerate on a single-cell chain).
pub fn closed_form_frequencies(
    circ: &CoupledCavityCircuit,
    case: BoundaryCase,
) -> Result<ModeSpectrum<(usize, usize)>> {
    if circ.lg2 != 0.0 {
        return Err(Error::invalid(
            "closed forms exist only for nearest-neighbor coupling (Lg2 = 0)".to_string(),
        ));
    }
    if !circ.matches_boundary(case) {
        return Err(Error::invalid(format!(
            "boundary inductance {} does not match the requested case ({} * Lg)",
            circ.lb,
            case.factor()
        )));
    }
    if circ.n < 2 || circ.m < 2 {
        return Err(Error::invalid(format!(
            "closed forms need at least 2 cells per axis, got {}x{}",
            circ.n, circ.m
        )));
    }
    let f0 = circ.f0();
    let beta = circ.beta();
    let mut entries = Vec::with_capacity(circ.n * circ.m);
    for i in 1..=circ.n {
        for j in 1..=circ.m {
            let gamma = case.gamma(i, j, circ.n, circ.m);
            let f = f0 / (1.0 + 4.0 * beta * (1.0 + 0.5 * gamma)).sqrt();
            entries.push(((i, j), f));
        }
    }
    Ok(ModeSpectrum::from_entries(entries))
}

/// Spatial field pattern of mode `(i, j)` on the mesh grid, normalized to
/// unit maximum amplitude.
#[derive(Debug, Clone)]
pub struct FieldMap {
    pub n: usize,
    pub m: usize,
    pub i: usize,
    pub j: usize,
    /// Row-major (`b`-major) amplitudes; see [`FieldMap::amplitude`].
    pub amplitudes: Vec<f64>,
}

impl FieldMap {
    /// Amplitude at cell `(a, b)`, 1-based.
    pub fn amplitude(&self, a: usize, b: usize) -> f64 {
        self.amplitudes[(b - 1) * self.n + (a - 1)]
    }
}

/// Vertical-field profile of mode `(i, j)` for the wall-shorted (`Lb = 0`)
/// nearest-neighbor mesh:
///
/// `E_ij(a, b) = sin(i (2a-1) pi / (2n)) sin(j (2b-1) pi / (2m))`,
///
/// sampled at cell centers and normalized to unit maximum. The mesh-current
/// eigenvector is this pattern with alternating cell signs
/// (`(-1)^(a+b) E_ij(a,b)`), which the tests verify against `M_L` directly.
pub fn mode_field_map(circ: &CoupledCavityCircuit, i: usize, j: usize) -> Result<FieldMap> {
    if circ.lb != 0.0 || circ.lg2 != 0.0 {
        return Err(Error::invalid(
            "field maps are defined for the wall-shorted nearest-neighbor mesh (Lb = 0, Lg2 = 0)"
                .to_string(),
        ));
    }
    if i < 1 || i > circ.n || j < 1 || j > circ.m {
        return Err(Error::invalid(format!(
            "mode index ({i},{j}) outside 1..={} x 1..={}",
            circ.n, circ.m
        )));
    }
    let (n, m) = (circ.n, circ.m);
    let mut amplitudes = Vec::with_capacity(n * m);
    let mut max_abs = 0.0f64;
    for b in 1..=m {
        for a in 1..=n {
            let ex = (i as f64 * (2.0 * a as f64 - 1.0) * PI / (2.0 * n as f64)).sin();
            let ey = (j as f64 * (2.0 * b as f64 - 1.0) * PI / (2.0 * m as f64)).sin();
            let v = ex * ey;
            max_abs = max_abs.max(v.abs());
            amplitudes.push(v);
        }
    }
    for v in amplitudes.iter_mut() {
        *v /= max_abs;
    }
    Ok(FieldMap { n, m, i, j, amplitudes })
}

/// Ratio `beta` above which the first-order tight-binding expansion is
/// flagged as extrapolating.
pub const TIGHT_BINDING_VALIDITY_BETA: f64 = 0.05;

/// First-order (tight-binding) approximation of the wall-shorted mesh
/// spectrum: with hopping `t = beta f0 / 2`,
///
/// `f_ij = f0 - 2 t (2 + cos(i pi/n) + cos(j pi/m))`.
///
/// Returns the spectrum and a flag set when `beta > 0.05`, where the
/// dropped `O(beta^2)` terms approach the percent level.
pub fn tight_binding_frequencies(
    circ: &CoupledCavityCircuit,
) -> Result<(ModeSpectrum<(usize, usize)>, bool)> {
    if circ.lb != 0.0 || circ.lg2 != 0.0 {
        return Err(Error::invalid(
            "tight-binding form applies to the wall-shorted nearest-neighbor mesh (Lb = 0, Lg2 = 0)"
                .to_string(),
        ));
    }
    let f0 = circ.f0();
    let beta = circ.beta();
    let t = 0.5 * beta * f0;
    let mut entries = Vec::with_capacity(circ.n * circ.m);
    for i in 1..=circ.n {
        for j in 1..=circ.m {
            let gamma = BoundaryCase::Zero.gamma(i, j, circ.n, circ.m);
            entries.push(((i, j), f0 - 2.0 * t * (2.0 + gamma)));
        }
    }
    Ok((
        ModeSpectrum::from_entries(entries),
        beta > TIGHT_BINDING_VALIDITY_BETA,
    ))
}

/// Band-bottom parameters of the infinite mesh lattice: the band-edge
/// frequency `f_c = f0 / sqrt(1 + 8 beta)` and the curvature wavenumber
/// `k0 = 1/(a sqrt(beta))` of the quadratic dispersion
/// `f(k) = f_c (1 + k^2 / (2 k0^2))` near it.
pub fn circuit_band_curvature(circ: &CoupledCavityCircuit, a: f64) -> Result<(f64, f64)> {
    if !(a > 0.0) || !a.is_finite() {
        return Err(Error::invalid(format!("lattice pitch must be positive, got {a}")));
    }
    let beta = circ.beta();
    if beta == 0.0 {
        return Err(Error::invalid(
            "band curvature is undefined for uncoupled meshes (beta = 0)".to_string(),
        ));
    }
    let f_c = circ.f0() / (1.0 + 8.0 * beta).sqrt();
    let k0 = 1.0 / (a * beta.sqrt());
    Ok((f_c, k0))
}

/// Mean relative deviation between a reference spectrum and a model
/// spectrum: `mean_k |ref_k - model_k| / ref_k`. Both slices must be the
/// same length and pairwise positive.
pub fn nre(reference: &[f64], model: &[f64]) -> f64 {
    assert_eq!(reference.len(), model.len(), "nre needs equal-length spectra");
    assert!(!reference.is_empty(), "nre needs at least one mode");
    let mut sum = 0.0;
    for (&r, &v) in reference.iter().zip(model.iter()) {
        sum += ((r - v) / r).abs();
    }
    sum / reference.len() as f64
}

/// Result of fitting the mesh model to an observed spectrum.
#[derive(Debug, Clone)]
pub struct CircuitFit {
    /// Fitted isolated-cell frequency, Hz.
    pub f0: f64,
    /// Fitted nearest-neighbor coupling ratio.
    pub beta: f64,
    /// Fitted second-neighbor coupling ratio (0 for a first-order fit).
    pub beta1: f64,
    /// Mean relative deviation of the fitted model from the observation.
    pub nre: f64,
    /// False when the simplex search stalled before its tolerances.
    pub converged: bool,
    pub evaluations: usize,
}

/// Fits `(f0, beta[, beta1])` of a wall-shorted `n x m` mesh to the lowest
/// `n*m` observed mode frequencies (Hz, any order) by minimizing the mean
/// relative deviation. `order` selects whether the second-neighbor coupling
/// is free or pinned to zero; the second-order fit is seeded with the
/// first-order optimum, so enlarging the model never worsens the fit.
pub fn fit_circuit_params(
    observed: &[f64],
    n: usize,
    m: usize,
    order: NeighbourOrder,
) -> Result<CircuitFit> {
    if n < 1 || m < 1 {
        return Err(Error::invalid(format!("grid must be at least 1x1, got {n}x{m}")));
    }
    let want = n * m;
    if observed.len() < want {
        return Err(Error::invalid(format!(
            "need at least {want} observed modes for a {n}x{m} fit, got {}",
            observed.len()
        )));
    }
    if observed.iter().any(|&f| !(f > 0.0) || !f.is_finite()) {
        return Err(Error::invalid("observed frequencies must be positive and finite".to_string()));
    }
    let mut target: Vec<f64> = observed.to_vec();
    target.sort_by(|a, b| a.partial_cmp(b).unwrap());
    target.truncate(want);

    let f_scale = *target.last().unwrap();
    let objective = |params: &[f64], fit_beta1: bool| -> f64 {
        let f0 = params[0] * f_scale;
        let beta = params[1];
        let beta1 = if fit_beta1 { params[2] } else { 0.0 };
        if !(f0 > 0.0) || !(beta >= 0.0) || !(beta1 >= 0.0) || beta > 10.0 || beta1 > 10.0 {
            return 1e6 + params.iter().map(|p| p.abs()).sum::<f64>();
        }
        let circ = match CoupledCavityCircuit::from_couplings(n, m, f0, beta, beta1, BoundaryCase::Zero) {
            Ok(c) => c,
            Err(_) => return 1e6,
        };
        match numeric_mode_frequencies(&circ) {
            Ok(spectrum) => nre(&target, &spectrum.frequencies()),
            Err(_) => 1e6,
        }
    };

    // Closed-form-inverted starting guess: the top of the observed band is
    // ~f0, and the lowest mode pins beta through the Lb = 0 closed form.
    let f_bot = target[0];
    let gamma_low = BoundaryCase::Zero.gamma(1, 1, n, m);
    let ratio = (f_scale / f_bot).powi(2) - 1.0;
    let beta_guess = (ratio / (4.0 * (1.0 + 0.5 * gamma_low))).max(1e-4);

    let opts = SimplexOptions::default();
    let mut best: Option<(Vec<f64>, f64, usize, bool)> = None;
    let mut consider = |result: simplex::SimplexResult| {
        let replace = match &best {
            None => true,
            Some((_, fx, _, _)) => result.fx < *fx,
        };
        if replace {
            best = Some((result.x, result.fx, result.evals, result.converged));
        }
    };

    let starts_2d: Vec<[f64; 2]> = vec![
        [1.0, beta_guess],
        [1.02, 2.0 * beta_guess],
        [0.98, 0.5 * beta_guess],
        [1.0, beta_guess.max(0.05)],
    ];
    for s in &starts_2d {
        consider(simplex::minimize(
            |p| objective(p, false),
            s,
            &[0.02, (0.5 * beta_guess).max(0.005)],
            &opts,
        ));
    }
    let (first_x, first_fx, first_evals, first_conv) = best.clone().unwrap();

    if order == NeighbourOrder::One {
        return Ok(CircuitFit {
            f0: first_x[0] * f_scale,
            beta: first_x[1].max(0.0),
            beta1: 0.0,
            nre: first_fx,
            converged: first_conv,
            evaluations: first_evals,
        });
    }

    // Second order: seed from the first-order optimum so the richer model
    // can only improve, plus an independent start with finite beta1.
    let mut best3: Option<(Vec<f64>, f64, usize, bool)> = None;
    let mut consider3 = |result: simplex::SimplexResult| {
        let replace = match &best3 {
            None => true,
            Some((_, fx, _, _)) => result.fx < *fx,
        };
        if replace {
            best3 = Some((result.x, result.fx, result.evals, result.converged));
        }
    };
    let starts_3d: Vec<[f64; 3]> = vec![
        [first_x[0], first_x[1], 0.0],
        [first_x[0], first_x[1], 0.1 * first_x[1].max(1e-3)],
        [1.0, beta_guess, 0.05 * beta_guess],
    ];
    for s in &starts_3d {
        consider3(simplex::minimize(
            |p| objective(p, true),
            s,
            &[0.01, (0.25 * beta_guess).max(0.003), (0.1 * beta_guess).max(0.002)],
            &opts,
        ));
    }
    let (x, fx, evals, conv) = best3.unwrap();
    let (fx, x) = if fx <= first_fx {
        (fx, x)
    } else {
        (first_fx, vec![first_x[0], first_x[1], 0.0])
    };

    Ok(CircuitFit {
        f0: x[0] * f_scale,
        beta: x[1].max(0.0),
        beta1: x[2].max(0.0),
        nre: fx,
        converged: conv,
        evaluations: first_evals + evals,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constants::GHZ;
    use proptest::prelude::*;

    fn circ(n: usize, m: usize, beta: f64, case: BoundaryCase) -> CoupledCavityCircuit {
        CoupledCavityCircuit::from_couplings(n, m, 20.0 * GHZ, beta, 0.0, case).unwrap()
    }

    #[test]
    fn uncoupled_meshes_all_resonate_at_f0() {
        let c = circ(3, 4, 0.0, BoundaryCase::Zero);
        let spectrum = closed_form_frequencies(&c, BoundaryCase::Zero).unwrap();
        for &f in &spectrum.frequencies() {
            assert!((f - c.f0()).abs() / c.f0() < 1e-12);
        }
    }

    #[test]
    fn infinite_lattice_bottom_approaches_band_edge() {
        // Lowest mode of a large wall-shorted grid -> f0/sqrt(1+8 beta).
        let beta = 0.2;
        let c = circ(60, 60, beta, BoundaryCase::Zero);
        let spectrum = closed_form_frequencies(&c, BoundaryCase::Zero).unwrap();
        let f_edge = c.f0() / (1.0f64 + 8.0 * beta).sqrt();
        let lowest = spectrum.frequencies()[0];
        assert!(lowest > f_edge);
        assert!((lowest - f_edge) / f_edge < 2e-3, "lowest = {lowest}, edge = {f_edge}");
    }

    #[test]
    fn corner_mode_of_wall_shorted_grid_sits_at_f0() {
        // gamma = -2 at (i, j) = (n, m): the top mode is exactly f0.
        let c = circ(4, 5, 0.3, BoundaryCase::Zero);
        let spectrum = closed_form_frequencies(&c, BoundaryCase::Zero).unwrap();
        let top = *spectrum.frequencies().last().unwrap();
        assert!((top - c.f0()).abs() / c.f0() < 1e-12);
    }

    #[test]
    fn single_mesh_impedance_matrix_matches_pinned_form() {
        let c = CoupledCavityCircuit::new(1, 1, 1e-9, 1e-13, 2e-10, 3e-10, 0.0).unwrap();
        let omega = 2.0 * PI * 15.0 * GHZ;
        let z = build_z1d(&c, omega, NeighbourOrder::One).unwrap();
        assert_eq!(z.dimension(), 1);
        let expected = omega * (c.l0 + c.lg + c.lb) - 1.0 / (omega * c.c0);
        assert!((z.matrix[(0, 0)].im - expected).abs() <= 1e-6 * expected.abs());
        assert_eq!(z.matrix[(0, 0)].re, 0.0);
    }

    #[test]
    fn three_mesh_chain_has_positional_diagonal_classes() {
        let c = CoupledCavityCircuit::new(3, 1, 1e-9, 1e-13, 2e-10, 3e-10, 0.0).unwrap();
        let omega = 2.0 * PI * 15.0 * GHZ;
        let z = build_z1d(&c, omega, NeighbourOrder::One).unwrap();
        let z0 = omega * c.l0 - 1.0 / (omega * c.c0);
        let z1 = z0 + omega * (c.lg + c.lb);
        let z2 = z0 + omega * 2.0 * c.lg;
        assert!((z.matrix[(0, 0)].im - z1).abs() <= 1e-9 * z1.abs());
        assert!((z.matrix[(1, 1)].im - z2).abs() <= 1e-9 * z2.abs());
        assert!((z.matrix[(2, 2)].im - z1).abs() <= 1e-9 * z1.abs());
        assert!((z.matrix[(0, 1)].im + omega * c.lg).abs() <= 1e-9 * omega * c.lg);
        assert_eq!(z.matrix[(0, 2)].im, 0.0);
    }

    #[test]
    fn impedance_vanishes_at_f0_for_uncoupled_meshes() {
        let c = circ(3, 1, 0.0, BoundaryCase::Zero);
        let omega = 2.0 * PI * c.f0();
        let z = build_z1d(&c, omega, NeighbourOrder::One).unwrap();
        for v in z.matrix.iter() {
            assert!(v.norm() < 1e-9 * omega * c.l0);
        }
    }

    #[test]
    fn single_cell_2d_matrix_matches_pinned_form() {
        let c = CoupledCavityCircuit::new(1, 1, 1e-9, 1e-13, 2e-10, 3e-10, 0.0).unwrap();
        let omega = 2.0 * PI * 15.0 * GHZ;
        let z = build_z2d(&c, omega).unwrap();
        assert_eq!(z.dimension(), 1);
        let expected = omega * (c.l0 + 2.0 * c.lg + 2.0 * c.lb) - 1.0 / (omega * c.c0);
        assert!((z.matrix[(0, 0)].im - expected).abs() <= 1e-9 * expected.abs());
    }

    #[test]
    fn two_by_two_eigenvalues_are_pairwise_chain_sums() {
        let c = CoupledCavityCircuit::new(2, 2, 1e-9, 1e-13, 2e-10, 1e-10, 0.0).unwrap();
        let omega = 2.0 * PI * 12.0 * GHZ;
        let z2 = build_z2d(&c, omega).unwrap();
        let z1 = build_z1d(&c, omega, NeighbourOrder::Two).unwrap();
        let chain = z1.eigenvalues_imag();
        let z0 = omega * c.l0 - 1.0 / (omega * c.c0);
        let mut sums: Vec<f64> = Vec::new();
        for &a in &chain {
            for &b in &chain {
                sums.push(a + b - z0);
            }
        }
        sums.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let full = z2.eigenvalues_imag();
        for (s, f) in sums.iter().zip(full.iter()) {
            assert!((s - f).abs() <= 1e-9 * f.abs().max(1.0), "{s} vs {f}");
        }
    }

    #[test]
    fn beta_zero_2d_matrix_is_diagonal() {
        let c = circ(3, 3, 0.0, BoundaryCase::Zero);
        let omega = 2.0 * PI * 10.0 * GHZ;
        let z = build_z2d(&c, omega).unwrap();
        for i in 0..z.dimension() {
            for j in 0..z.dimension() {
                if i != j {
                    assert_eq!(z.matrix[(i, j)], Complex64::new(0.0, 0.0));
                }
            }
        }
    }

    #[test]
    fn numeric_matches_closed_form_for_all_three_cases() {
        for case in [BoundaryCase::Zero, BoundaryCase::EqualToCoupling, BoundaryCase::TwiceCoupling] {
            let c = circ(4, 3, 0.17, case);
            let closed = closed_form_frequencies(&c, case).unwrap();
            let numeric = numeric_mode_frequencies(&c).unwrap();
            let fc = closed.frequencies();
            let fn_ = numeric.frequencies();
            for (a, b) in fc.iter().zip(fn_.iter()) {
                assert!(
                    ((a - b) / a).abs() < 1e-10,
                    "{case:?}: closed {a}, numeric {b}"
                );
            }
        }
    }

    #[test]
    fn numeric_reports_expected_multiplicities_for_square_grid() {
        let c = circ(2, 2, 0.1, BoundaryCase::Zero);
        let numeric = numeric_mode_frequencies(&c).unwrap();
        let groups = numeric.degeneracy_groups(crate::spectra::DEGENERACY_RTOL);
        let sizes: Vec<usize> = groups.iter().map(|g| g.len()).collect();
        // (1,1); (1,2)+(2,1); (2,2).
        assert_eq!(sizes, vec![1, 2, 1]);
        let entries = numeric.entries();
        assert_eq!(entries[0].0, (1, 1));
        assert_eq!(entries[1].0, (1, 2));
        assert_eq!(entries[2].0, (2, 1));
    }

    #[test]
    fn increasing_boundary_inductance_lowers_every_mode() {
        let base = CoupledCavityCircuit::new(3, 3, 1e-9, 1.2e-13, 2e-10, 0.0, 0.0).unwrap();
        let mut prev = numeric_mode_frequencies(&base).unwrap().frequencies();
        for lb in [5e-11, 2e-10, 5e-10] {
            let c = CoupledCavityCircuit::new(3, 3, 1e-9, 1.2e-13, 2e-10, lb, 0.0).unwrap();
            let cur = numeric_mode_frequencies(&c).unwrap().frequencies();
            for (p, q) in prev.iter().zip(cur.iter()) {
                assert!(q < p, "mode did not drop when Lb grew: {q} !< {p}");
            }
            prev = cur;
        }
    }

    #[test]
    fn wall_shorted_spectrum_stays_inside_band() {
        let c = circ(5, 4, 0.23, BoundaryCase::Zero);
        let spectrum = numeric_mode_frequencies(&c).unwrap();
        let f0 = c.f0();
        let edge = f0 / (1.0f64 + 8.0 * c.beta()).sqrt();
        for &f in &spectrum.frequencies() {
            assert!(f >= edge * (1.0 - 1e-12));
            assert!(f <= f0 * (1.0 + 1e-12));
        }
    }

    #[test]
    fn single_cell_field_map_is_unit() {
        let c = circ(1, 1, 0.0, BoundaryCase::Zero);
        let map = mode_field_map(&c, 1, 1).unwrap();
        assert_eq!(map.amplitudes, vec![1.0]);
    }

    #[test]
    fn fundamental_field_map_has_one_sign() {
        let c = circ(5, 5, 0.1, BoundaryCase::Zero);
        let map = mode_field_map(&c, 1, 1).unwrap();
        assert!(map.amplitudes.iter().all(|&v| v > 0.0));
        assert!((map.amplitudes.iter().cloned().fold(0.0f64, f64::max) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn top_mode_field_map_alternates_sign_in_both_axes() {
        let n = 6;
        let c = circ(n, n, 0.1, BoundaryCase::Zero);
        let map = mode_field_map(&c, n, n).unwrap();
        for b in 1..=n {
            for a in 1..n {
                assert!(map.amplitude(a, b) * map.amplitude(a + 1, b) < 0.0);
            }
        }
        for a in 1..=n {
            for b in 1..n {
                assert!(map.amplitude(a, b) * map.amplitude(a, b + 1) < 0.0);
            }
        }
    }

    #[test]
    fn field_maps_are_mutually_orthogonal() {
        let c = circ(4, 3, 0.1, BoundaryCase::Zero);
        let modes = [(1, 1), (2, 1), (1, 2), (3, 2), (4, 3)];
        for (p, &(i1, j1)) in modes.iter().enumerate() {
            for &(i2, j2) in modes.iter().skip(p + 1) {
                let m1 = mode_field_map(&c, i1, j1).unwrap();
                let m2 = mode_field_map(&c, i2, j2).unwrap();
                let dot: f64 = m1
                    .amplitudes
                    .iter()
                    .zip(m2.amplitudes.iter())
                    .map(|(x, y)| x * y)
                    .sum();
                assert!(dot.abs() < 1e-10, "({i1},{j1})x({i2},{j2}) dot = {dot}");
            }
        }
    }

    #[test]
    fn sign_flipped_field_map_is_an_inductance_eigenvector() {
        // The mesh-current eigenvector of M_L for mode (i,j) is the field
        // map with alternating cell signs, with eigenvalue
        // L0 (1 + 4 beta (1 + gamma/2)).
        let c = circ(5, 4, 0.2, BoundaryCase::Zero);
        let ml = ml_matrix_2d(&c, NeighbourOrder::Two);
        for (i, j) in [(1, 1), (2, 3), (5, 4), (3, 1)] {
            let map = mode_field_map(&c, i, j).unwrap();
            let v: Vec<f64> = (0..c.n * c.m)
                .map(|p| {
                    let a = p % c.n;
                    let b = p / c.n;
                    let sign = if (a + b) % 2 == 0 { 1.0 } else { -1.0 };
                    sign * map.amplitudes[p]
                })
                .collect();
            let gamma = BoundaryCase::Zero.gamma(i, j, c.n, c.m);
            let lambda = c.l0 * (1.0 + 4.0 * c.beta() * (1.0 + 0.5 * gamma));
            let mut worst = 0.0f64;
            for p in 0..v.len() {
                let mut acc = 0.0;
                for q in 0..v.len() {
                    acc += ml[(p, q)] * v[q];
                }
                worst = worst.max((acc - lambda * v[p]).abs());
            }
            assert!(worst < 1e-12 * lambda, "(i,j)=({i},{j}): residual {worst:e}");
        }
    }

    #[test]
    fn tight_binding_reference_points() {
        let c = circ(4, 4, 0.0, BoundaryCase::Zero);
        let (spectrum, flagged) = tight_binding_frequencies(&c).unwrap();
        assert!(!flagged);
        for &f in &spectrum.frequencies() {
            assert!((f - c.f0()).abs() / c.f0() < 1e-12);
        }
        let c = circ(4, 4, 0.06, BoundaryCase::Zero);
        let (_, flagged) = tight_binding_frequencies(&c).unwrap();
        assert!(flagged);
    }

    #[test]
    fn tight_binding_remainder_is_quadratic_in_beta() {
        // First-order expansion: the dropped remainder is 3x^2/8 * f0 with
        // x = 4 beta (1 + gamma/2) <= 8 beta, so max deviation < 24 beta^2 f0
        // (~17.5 beta^2 f0 on a 4x4 grid) and scales as beta^2.
        let max_dev = |beta: f64| -> f64 {
            let c = circ(4, 4, beta, BoundaryCase::Zero);
            let (tb, _) = tight_binding_frequencies(&c).unwrap();
            let exact = closed_form_frequencies(&c, BoundaryCase::Zero).unwrap();
            tb.frequencies()
                .iter()
                .zip(exact.frequencies().iter())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0f64, f64::max)
        };
        let f0 = 20.0 * GHZ;
        let d1 = max_dev(0.01);
        assert!(d1 < 24.0 * 0.01f64.powi(2) * f0, "deviation {d1:e}");
        assert!(d1 > 10.0 * 0.01f64.powi(2) * f0, "remainder should be genuinely quadratic");
        let d2 = max_dev(0.0025);
        let ratio = d1 / d2;
        assert!((ratio - 16.0).abs() < 2.0, "beta^2 scaling broken: ratio {ratio}");
    }

    #[test]
    fn tight_binding_bandwidth_approaches_8t() {
        let beta = 0.01;
        let c = circ(40, 40, beta, BoundaryCase::Zero);
        let (tb, _) = tight_binding_frequencies(&c).unwrap();
        let freqs = tb.frequencies();
        let bandwidth = freqs.last().unwrap() - freqs[0];
        let t = 0.5 * beta * c.f0();
        assert!((bandwidth / (8.0 * t) - 1.0).abs() < 5e-3, "bw/8t = {}", bandwidth / (8.0 * t));
    }

    #[test]
    fn band_curvature_reference_point() {
        let c = circ(4, 4, 0.125, BoundaryCase::Zero);
        let (f_c, k0) = circuit_band_curvature(&c, 2e-3).unwrap();
        assert!((f_c - c.f0() / 2.0f64.sqrt()).abs() / f_c < 1e-12);
        assert!((k0 - 1.0 / (2e-3 * 0.125f64.sqrt())).abs() / k0 < 1e-12);
    }

    #[test]
    fn band_curvature_rejects_uncoupled_lattice() {
        let c = circ(4, 4, 0.0, BoundaryCase::Zero);
        assert!(circuit_band_curvature(&c, 2e-3).is_err());
    }

    #[test]
    fn quadratic_band_tracks_closed_form_at_small_k() {
        // Compare f_c (1 + k^2/(2 k0^2)) against the closed form evaluated
        // on the lattice dispersion gamma(k) = 2 cos(k a / sqrt(2)) for
        // k <= 0.2 k0.
        let a = 2e-3;
        for beta in [0.02, 0.05, 0.1] {
            let c = circ(4, 4, beta, BoundaryCase::Zero);
            let (f_c, k0) = circuit_band_curvature(&c, a).unwrap();
            for step in 1..=10 {
                let k = 0.2 * k0 * step as f64 / 10.0;
                let quad = f_c * (1.0 + 0.5 * (k / k0).powi(2));
                let gamma = 2.0 * (k * a / 2.0f64.sqrt()).cos();
                let exact = c.f0() / (1.0 + 4.0 * beta * (1.0 + 0.5 * gamma)).sqrt();
                assert!(
                    ((quad - exact) / exact).abs() < 0.01,
                    "beta {beta}, k/k0 {}: quad {quad}, exact {exact}",
                    k / k0
                );
            }
        }
    }

    #[test]
    fn fit_recovers_exact_synthetic_spectrum() {
        let truth = circ(4, 4, 0.18, BoundaryCase::Zero);
        let observed = numeric_mode_frequencies(&truth).unwrap().frequencies();
        let fit = fit_circuit_params(&observed, 4, 4, NeighbourOrder::One).unwrap();
        assert!(fit.nre < 1e-10, "NRE = {:e}", fit.nre);
        assert!((fit.f0 - truth.f0()).abs() / truth.f0() < 1e-8, "f0 = {}", fit.f0);
        assert!((fit.beta - 0.18).abs() < 1e-8 * 0.18 + 1e-10, "beta = {}", fit.beta);
    }

    #[test]
    fn fit_recovers_second_neighbour_coupling() {
        let truth = CoupledCavityCircuit::from_couplings(3, 3, 20.0 * GHZ, 0.2, 0.03, BoundaryCase::Zero).unwrap();
        let observed = numeric_mode_frequencies(&truth).unwrap().frequencies();
        let fit = fit_circuit_params(&observed, 3, 3, NeighbourOrder::Two).unwrap();
        assert!(fit.nre < 1e-10, "NRE = {:e}", fit.nre);
        assert!((fit.beta - 0.2).abs() < 1e-6);
        assert!((fit.beta1 - 0.03).abs() < 1e-6);
    }

    #[test]
    fn second_order_fit_never_loses_to_first_order() {
        let truth = CoupledCavityCircuit::from_couplings(3, 3, 20.0 * GHZ, 0.2, 0.04, BoundaryCase::Zero).unwrap();
        let observed = numeric_mode_frequencies(&truth).unwrap().frequencies();
        let fit1 = fit_circuit_params(&observed, 3, 3, NeighbourOrder::One).unwrap();
        let fit2 = fit_circuit_params(&observed, 3, 3, NeighbourOrder::Two).unwrap();
        assert!(fit2.nre <= fit1.nre);
        assert!(fit1.nre > 1e-6, "first order should not explain second-order data exactly");
    }

    #[test]
    fn perturbing_one_mode_floors_the_fit_error() {
        // Moving a single mode by 1% forces NRE >= ~0.01/(n*m): the other
        // modes are exact at the true parameters and no parameter set can
        // do better than absorbing the perturbation into one term.
        let (n, m) = (3, 3);
        let truth = circ(n, m, 0.15, BoundaryCase::Zero);
        let mut observed = numeric_mode_frequencies(&truth).unwrap().frequencies();
        observed[4] *= 1.01;
        let fit = fit_circuit_params(&observed, n, m, NeighbourOrder::One).unwrap();
        let floor = 0.0095 / (n * m) as f64;
        assert!(fit.nre >= floor, "NRE = {:e}, floor = {:e}", fit.nre, floor);
    }

    #[test]
    fn fit_rejects_short_spectra() {
        assert!(fit_circuit_params(&[1e9, 2e9], 2, 2, NeighbourOrder::One).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn closed_and_numeric_agree_for_random_circuits(
            n in 2usize..6,
            m in 2usize..6,
            beta in 0.0f64..0.5,
            case_pick in 0usize..3,
        ) {
            let case = [BoundaryCase::Zero, BoundaryCase::EqualToCoupling, BoundaryCase::TwiceCoupling][case_pick];
            let c = circ(n, m, beta, case);
            let closed = closed_form_frequencies(&c, case).unwrap();
            let numeric = numeric_mode_frequencies(&c).unwrap();
            for (a, b) in closed.frequencies().iter().zip(numeric.frequencies().iter()) {
                prop_assert!(((a - b) / a).abs() < 1e-10);
            }
        }

        #[test]
        fn kronecker_sum_identity_holds_entrywise_and_spectrally(
            n in 1usize..5,
            m in 1usize..5,
            beta in 0.0f64..0.5,
            beta1 in 0.0f64..0.2,
            lb_factor in 0.0f64..2.5,
        ) {
            let l0 = 1e-9;
            let c = CoupledCavityCircuit::new(n, m, l0, 1e-13, beta * l0, lb_factor * beta * l0, beta1 * l0).unwrap();
            let omega = 2.0 * PI * 13.0 * GHZ;
            let z2 = build_z2d(&c, omega).unwrap();
            let z1 = build_z1d(&c, omega, NeighbourOrder::Two).unwrap();

            // Entrywise: Z2D = Z1Dx (+) Z1Dy - Z0 I.
            let z0 = omega * c.l0 - 1.0 / (omega * c.c0);
            let zx = z1.imag_part();
            let zy = {
                let my = ml_matrix_1d(m, NeighbourOrder::Two, c.l0, c.lg, c.lb, c.lg2);
                my.map(|v| omega * v) - DMatrix::<f64>::identity(m, m).map(|v| v / (omega * c.c0))
            };
            let dim = n * m;
            for p in 0..dim {
                for q in 0..dim {
                    let (px, py) = (p % n, p / n);
                    let (qx, qy) = (q % n, q / n);
                    let mut expect = 0.0;
                    if py == qy { expect += zx[(px, qx)]; }
                    if px == qx { expect += zy[(py, qy)]; }
                    if p == q { expect -= z0; }
                    let got = z2.matrix[(p, q)].im;
                    prop_assert!((got - expect).abs() <= 1e-10 * (omega * c.l0),
                        "entry ({p},{q}): got {got}, expect {expect}");
                }
            }

            // Spectrally: eigenvalues are pairwise sums minus Z0.
            let ex = z1.eigenvalues_imag();
            let ey = {
                let zy_mat = ImpedanceMatrix { omega, matrix: zy.map(|v| Complex64::new(0.0, v)) };
                zy_mat.eigenvalues_imag()
            };
            let mut sums: Vec<f64> = Vec::new();
            for &ax in &ex {
                for &ay in &ey {
                    sums.push(ax + ay - z0);
                }
            }
            sums.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let full = z2.eigenvalues_imag();
            let scale = omega * c.l0;
            for (s, f) in sums.iter().zip(full.iter()) {
                prop_assert!((s - f).abs() <= 1e-10 * scale.max(f.abs()));
            }
        }

        #[test]
        fn numeric_frequencies_make_the_impedance_singular(
            n in 2usize..5,
            m in 2usize..5,
            beta in 0.01f64..0.5,
            lb_factor in 0.0f64..2.0,
        ) {
            let l0 = 1e-9;
            let c = CoupledCavityCircuit::new(n, m, l0, 1.0e-13, beta * l0, lb_factor * l0, 0.0).unwrap();
            let spectrum = numeric_mode_frequencies(&c).unwrap();
            for &f in &spectrum.frequencies() {
                let z = build_z2d(&c, 2.0 * PI * f).unwrap();
                let eigs = z.eigenvalues_imag();
                let smallest = eigs.iter().map(|v| v.abs()).fold(f64::INFINITY, f64::min);
                let norm = eigs.iter().map(|v| v.abs()).fold(0.0f64, f64::max);
                prop_assert!(smallest <= 1e-8 * norm, "|Z| min {smallest:e}, norm {norm:e}");
            }
        }

        #[test]
        fn impedance_matrices_are_symmetric_and_reactive(
            n in 1usize..6,
            beta in 0.0f64..0.5,
        ) {
            let c = circ(n, n.max(2), beta, BoundaryCase::TwiceCoupling);
            let z = build_z2d(&c, 2.0 * PI * 9.0 * GHZ).unwrap();
            prop_assert!(z.is_symmetric());
            prop_assert!(z.is_purely_imaginary());
        }
    }
}
