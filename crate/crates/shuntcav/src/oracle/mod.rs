//! Finite-difference ground truth for the enclosure's transverse modes.
//!
//! The thin-package modes are TM-like: the electric field is vertical and
//! varies only laterally, so the eigenproblem is the 2D Dirichlet Helmholtz
//! equation `-laplace(Ez) = lambda Ez` on the cavity cross-section, with
//! `Ez = 0` on the outer walls and on every shunt post. Frequencies follow
//! as `f = sqrt(lambda) c0 / (2 pi sqrt(eps_eff))`.
//!
//! A second, cell-centered all-Neumann variant discretizes one lattice unit
//! cell and yields the lattice cutoff of the infinite shunt array.
//!
//! Discretization is the 5-point Laplacian with Dirichlet nodes eliminated,
//! which keeps the operator symmetric positive definite. Everything is
//! deterministic: fixed node ordering, a seeded start vector, serial loops.

pub mod solver;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::constants::C0;
use crate::model::EnclosureSpec;
use crate::{Error, Result};

use solver::{Csr, EigOptions, MgLevel, Multigrid, NoPrecon};

/// Where the unknowns live on the grid.
///
/// `VertexCentered` places nodes on cell corners and is used with Dirichlet
/// walls (the outer node ring is masked). `CellCentered` places nodes at
/// cell midpoints; a missing neighbor mirrors the node itself, which is the
/// natural Neumann closure for the periodic unit cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeLayout {
    VertexCentered,
    CellCentered,
}

/// Uniform tensor grid over a rectangle, `nx x ny` cells of size `hx x hy`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid2D {
    pub nx: usize,
    pub ny: usize,
    pub hx: f64,
    pub hy: f64,
    pub layout: NodeLayout,
}

impl Grid2D {
    pub fn nodes_x(&self) -> usize {
        match self.layout {
            NodeLayout::VertexCentered => self.nx + 1,
            NodeLayout::CellCentered => self.nx,
        }
    }

    pub fn nodes_y(&self) -> usize {
        match self.layout {
            NodeLayout::VertexCentered => self.ny + 1,
            NodeLayout::CellCentered => self.ny,
        }
    }

    pub fn node_count(&self) -> usize {
        self.nodes_x() * self.nodes_y()
    }

    pub fn node_index(&self, i: usize, j: usize) -> usize {
        j * self.nodes_x() + i
    }

    /// Physical coordinates of node `(i, j)`.
    pub fn node_coords(&self, i: usize, j: usize) -> (f64, f64) {
        match self.layout {
            NodeLayout::VertexCentered => (i as f64 * self.hx, j as f64 * self.hy),
            NodeLayout::CellCentered => ((i as f64 + 0.5) * self.hx, (j as f64 + 0.5) * self.hy),
        }
    }
}

/// A grid plus the Dirichlet mask: `true` marks a node inside metal (or on
/// the outer wall for the vertex layout), removed from the unknown set and
/// forced to zero field.
#[derive(Debug, Clone)]
pub struct Discretization {
    pub grid: Grid2D,
    pub mask: Vec<bool>,
}

impl Discretization {
    pub fn is_masked(&self, i: usize, j: usize) -> bool {
        self.mask[self.grid.node_index(i, j)]
    }

    pub fn unmasked_count(&self) -> usize {
        self.mask.iter().filter(|&&m| !m).count()
    }
}

/// Grids at or above this estimated unknown count are rounded up to cell
/// counts divisible by 32, so the multigrid hierarchy can coarsen five
/// times before hitting an odd dimension.
const MG_GRID_ROUND: usize = 50_000;

/// Unknown count below which the V-cycle recursion stops and the level is
/// solved directly.
const MG_COARSEST: usize = 1_500;

fn round_up_to(v: usize, m: usize) -> usize {
    v.div_ceil(m) * m
}

/// Index-space centers of the shunt posts: the lattice is centered in the
/// box, so center `k` of `count` sits at `n/2 + offset/h` where the offset
/// is an exact integer multiple of `a/2`. Computing in index space keeps
/// the mask bitwise mirror-symmetric.
fn post_centers_1d(count: usize, spacing: f64, n: usize, h: f64) -> Vec<f64> {
    let half = n as f64 / 2.0;
    (0..count)
        .map(|k| {
            let steps = 2 * k as i64 - (count as i64 - 1);
            half + (steps as f64) * (0.5 * spacing) / h
        })
        .collect()
}

/// Offset of a node's coordinate from grid index `i`, in index units.
fn node_offset(layout: NodeLayout) -> f64 {
    match layout {
        NodeLayout::VertexCentered => 0.0,
        NodeLayout::CellCentered => 0.5,
    }
}

/// Masks every node whose center lies inside the disk of radius `r` at
/// index-space center `(cix, ciy)`. If the disk is too small to capture any
/// node, the nearest node (or the tied set of nearest nodes, keeping mirror
/// symmetry) is masked instead, so every post perturbs the operator.
fn mask_disk(disc: &mut Discretization, cix: f64, ciy: f64, r: f64, interior_only: bool) {
    let g = disc.grid;
    let off = node_offset(g.layout);
    let (nx_nodes, ny_nodes) = (g.nodes_x(), g.nodes_y());
    let (ilo, ihi, jlo, jhi) = if interior_only {
        (1, nx_nodes - 2, 1, ny_nodes - 2)
    } else {
        (0, nx_nodes - 1, 0, ny_nodes - 1)
    };

    let ri = r / g.hx;
    let rj = r / g.hy;
    let i_from = ((cix - ri - 1.0).floor().max(ilo as f64)) as usize;
    let i_to = ((cix + ri + 1.0).ceil().min(ihi as f64)) as usize;
    let j_from = ((ciy - rj - 1.0).floor().max(jlo as f64)) as usize;
    let j_to = ((ciy + rj + 1.0).ceil().min(jhi as f64)) as usize;

    let r2 = r * r;
    let mut hit = 0usize;
    for j in j_from..=j_to {
        let dv = (j as f64 + off - ciy) * g.hy;
        for i in i_from..=i_to {
            let du = (i as f64 + off - cix) * g.hx;
            if du * du + dv * dv <= r2 {
                disc.mask[g.node_index(i, j)] = true;
                hit += 1;
            }
        }
    }
    if hit > 0 {
        return;
    }

    // Nearest-node fallback. Ties (center exactly between nodes) mask the
    // whole tied set so mirror symmetry survives.
    let candidates = |c: f64, lo: usize, hi: usize| -> Vec<usize> {
        let target = c - off;
        let fl = target.floor();
        let cl = target.ceil();
        let mut out = Vec::new();
        let d_fl = (target - fl).abs();
        let d_cl = (cl - target).abs();
        let push = |out: &mut Vec<usize>, v: f64| {
            let v = v.max(lo as f64).min(hi as f64) as usize;
            if !out.contains(&v) {
                out.push(v);
            }
        };
        if (d_fl - d_cl).abs() <= 1e-9 {
            push(&mut out, fl);
            push(&mut out, cl);
        } else if d_fl < d_cl {
            push(&mut out, fl);
        } else {
            push(&mut out, cl);
        }
        out
    };
    for j in candidates(ciy, jlo, jhi) {
        for i in candidates(cix, ilo, ihi) {
            disc.mask[g.node_index(i, j)] = true;
        }
    }
}

/// Builds the vertex-centered discretization of the full cavity cross
/// section at exactly `nx x ny` cells: outer wall ring masked, one disk per
/// shunt post.
fn build_vertex_disc(spec: &EnclosureSpec, nx: usize, ny: usize) -> Discretization {
    let grid = Grid2D {
        nx,
        ny,
        hx: spec.lx / nx as f64,
        hy: spec.ly / ny as f64,
        layout: NodeLayout::VertexCentered,
    };
    let mut disc = Discretization {
        grid,
        mask: vec![false; grid.node_count()],
    };
    for i in 0..grid.nodes_x() {
        disc.mask[grid.node_index(i, 0)] = true;
        disc.mask[grid.node_index(i, grid.nodes_y() - 1)] = true;
    }
    for j in 0..grid.nodes_y() {
        disc.mask[grid.node_index(0, j)] = true;
        disc.mask[grid.node_index(grid.nodes_x() - 1, j)] = true;
    }

    let r = spec.shunt_radius;
    let (kx, ky) = spec.shunt_counts;
    if r > 0.0 && kx > 0 && ky > 0 {
        let cxs = post_centers_1d(kx, spec.shunt_spacing, nx, grid.hx);
        let cys = post_centers_1d(ky, spec.shunt_spacing, ny, grid.hy);
        for cy in &cys {
            for cx in &cxs {
                mask_disk(&mut disc, *cx, *cy, r, true);
            }
        }
    }
    disc
}

/// Discretizes the full cavity cross-section at resolution `h` (the actual
/// spacing is `lx/nx <= h` after rounding the cell counts up). Requires at
/// least 8 cells across the gap between adjacent posts so the narrowest
/// field channel is resolved.
pub fn discretize(spec: &EnclosureSpec, h: f64) -> Result<Discretization> {
    spec.check()?;
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::invalid(format!("grid spacing must be positive and finite, got {h}")));
    }
    let r = spec.shunt_radius;
    let a = spec.shunt_spacing;
    let has_lattice = r > 0.0 && spec.shunt_counts.0 > 0 && spec.shunt_counts.1 > 0;
    if has_lattice {
        let gap = a - 2.0 * r;
        if h > gap / 8.0 * (1.0 + 1e-9) {
            return Err(Error::invalid(format!(
                "grid spacing {h} is too coarse for the {gap} post gap; need h <= gap/8"
            )));
        }
    }
    let nx0 = ((spec.lx / h - 1e-9).ceil() as usize).max(4);
    let ny0 = ((spec.ly / h - 1e-9).ceil() as usize).max(4);
    let (nx, ny) = if (nx0 - 1) * (ny0 - 1) >= MG_GRID_ROUND {
        (round_up_to(nx0, 32), round_up_to(ny0, 32))
    } else {
        (round_up_to(nx0, 2), round_up_to(ny0, 2))
    };
    Ok(build_vertex_disc(spec, nx, ny))
}

/// Discretizes one `a x a` lattice unit cell, cell-centered with Neumann
/// sides and a centered post disk of radius `r` (which may be zero).
pub fn discretize_unit_cell(a: f64, r: f64, h: f64) -> Result<Discretization> {
    if !(a > 0.0) || !a.is_finite() {
        return Err(Error::invalid(format!("cell size must be positive and finite, got {a}")));
    }
    if !(r >= 0.0) || !r.is_finite() || r >= 0.5 * a {
        return Err(Error::invalid(format!(
            "post radius must satisfy 0 <= r < a/2, got r = {r}, a = {a}"
        )));
    }
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::invalid(format!("grid spacing must be positive and finite, got {h}")));
    }
    let n = ((a / h - 1e-9).ceil() as usize).max(4);
    let grid = Grid2D {
        nx: n,
        ny: n,
        hx: a / n as f64,
        hy: a / n as f64,
        layout: NodeLayout::CellCentered,
    };
    let mut disc = Discretization {
        grid,
        mask: vec![false; grid.node_count()],
    };
    if r > 0.0 {
        let c = n as f64 / 2.0;
        mask_disk(&mut disc, c, c, r, false);
    }
    Ok(disc)
}

/// The discrete negative Laplacian restricted to unmasked nodes.
#[derive(Debug, Clone)]
pub struct HelmholtzOperator {
    pub disc: Discretization,
    pub eps_eff: f64,
    csr: Csr,
    /// node index -> unknown index, `u32::MAX` for masked nodes.
    index_of: Vec<u32>,
    /// unknown index -> node index.
    node_of: Vec<u32>,
}

impl HelmholtzOperator {
    pub fn n_unknowns(&self) -> usize {
        self.node_of.len()
    }

    pub fn matrix(&self) -> &Csr {
        &self.csr
    }

    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.csr.matvec(x, y);
    }

    /// Scatters an unknown-space vector onto the full node grid (masked
    /// nodes zero).
    pub fn embed(&self, v: &[f64]) -> Vec<f64> {
        let mut full = vec![0.0; self.disc.grid.node_count()];
        for (u, &node) in self.node_of.iter().enumerate() {
            full[node as usize] = v[u];
        }
        full
    }
}

/// Assembles the 5-point operator on a discretization. Dirichlet neighbors
/// (masked, or outside a vertex-centered grid) are eliminated; a neighbor
/// position outside a cell-centered grid mirrors the node (Neumann) and
/// drops out of the row entirely.
pub fn operator_from_discretization(disc: Discretization, eps_eff: f64) -> Result<HelmholtzOperator> {
    if !(eps_eff >= 1.0) || !eps_eff.is_finite() {
        return Err(Error::invalid(format!(
            "effective permittivity must be >= 1 and finite, got {eps_eff}"
        )));
    }
    let g = disc.grid;
    let (nxn, nyn) = (g.nodes_x(), g.nodes_y());
    let total = g.node_count();

    let mut index_of = vec![u32::MAX; total];
    let mut node_of = Vec::new();
    for node in 0..total {
        if !disc.mask[node] {
            index_of[node] = node_of.len() as u32;
            node_of.push(node as u32);
        }
    }
    if node_of.is_empty() {
        return Err(Error::invalid("every grid node is masked; nothing to solve"));
    }

    let n = node_of.len();
    let inv_hx2 = 1.0 / (g.hx * g.hx);
    let inv_hy2 = 1.0 / (g.hy * g.hy);
    let mut rowp = Vec::with_capacity(n + 1);
    let mut cols: Vec<u32> = Vec::with_capacity(5 * n);
    let mut vals: Vec<f64> = Vec::with_capacity(5 * n);
    rowp.push(0u32);

    // Neighbor order south, west, diagonal, east, north keeps column
    // indices ascending within each row.
    for u in 0..n {
        let node = node_of[u] as usize;
        let (i, j) = (node % nxn, node / nxn);
        let mut diag = 0.0;
        let mut lower: [(u32, f64); 2] = [(0, 0.0); 2];
        let mut nlower = 0;
        let mut upper: [(u32, f64); 2] = [(0, 0.0); 2];
        let mut nupper = 0;

        let mut visit = |ii: i64, jj: i64, w: f64, before: bool| {
            if ii < 0 || jj < 0 || ii >= nxn as i64 || jj >= nyn as i64 {
                return 0.0; // Neumann mirror: no contribution at all
            }
            let nb = jj as usize * nxn + ii as usize;
            if index_of[nb] != u32::MAX {
                if before {
                    lower[nlower] = (index_of[nb], -w);
                    nlower += 1;
                } else {
                    upper[nupper] = (index_of[nb], -w);
                    nupper += 1;
                }
            }
            w
        };
        diag += visit(i as i64, j as i64 - 1, inv_hy2, true);
        diag += visit(i as i64 - 1, j as i64, inv_hx2, true);
        diag += visit(i as i64 + 1, j as i64, inv_hx2, false);
        diag += visit(i as i64, j as i64 + 1, inv_hy2, false);

        for &(c, v) in lower.iter().take(nlower) {
            cols.push(c);
            vals.push(v);
        }
        cols.push(u as u32);
        vals.push(diag);
        for &(c, v) in upper.iter().take(nupper) {
            cols.push(c);
            vals.push(v);
        }
        rowp.push(cols.len() as u32);
    }

    Ok(HelmholtzOperator {
        disc,
        eps_eff,
        csr: Csr { nrows: n, rowp, cols, vals },
        index_of,
        node_of,
    })
}

/// Discretizes and assembles in one step.
pub fn assemble_operator(spec: &EnclosureSpec, h: f64) -> Result<HelmholtzOperator> {
    let disc = discretize(spec, h)?;
    operator_from_discretization(disc, spec.eps_effective()?)
}

/// One computed eigenmode: frequency, relative algebraic residual, and the
/// vertical-field profile over the full node grid (masked nodes zero, unit
/// Euclidean norm, sign fixed so the largest-magnitude sample is positive).
#[derive(Debug, Clone)]
pub struct OracleField {
    pub frequency: f64,
    pub residual: f64,
    pub ez: Vec<f64>,
    pub grid: Grid2D,
}

impl OracleField {
    /// Maximum mirror asymmetry of the profile about the two box midplanes,
    /// relative to the largest sample. Symmetric geometry must yield values
    /// at the solver-noise level.
    pub fn mirror_asymmetry(&self) -> (f64, f64) {
        let g = self.grid;
        let (nxn, nyn) = (g.nodes_x(), g.nodes_y());
        let peak = self.ez.iter().fold(0.0f64, |m, &v| m.max(v.abs())).max(1e-300);
        let mut ax = 0.0f64;
        let mut ay = 0.0f64;
        for j in 0..nyn {
            for i in 0..nxn {
                let v = self.ez[g.node_index(i, j)];
                let vx = self.ez[g.node_index(nxn - 1 - i, j)];
                let vy = self.ez[g.node_index(i, nyn - 1 - j)];
                ax = ax.max((v - vx).abs());
                ay = ay.max((v - vy).abs());
            }
        }
        (ax / peak, ay / peak)
    }
}

/// Solver configuration for the mode computations.
#[derive(Debug, Clone, Copy)]
pub struct OracleOptions {
    /// Unknown counts at or below this use a dense symmetric eigensolver.
    pub dense_cutoff: usize,
    /// Unknown counts at or above this enable the multigrid preconditioner
    /// (vertex-centered grids only).
    pub mg_threshold: usize,
    pub eig: EigOptions,
}

impl Default for OracleOptions {
    fn default() -> Self {
        OracleOptions {
            dense_cutoff: 800,
            mg_threshold: 50_000,
            eig: EigOptions::default(),
        }
    }
}

/// Hard ceiling on the acceptable relative residual `|A v - lambda v| /
/// lambda` of any returned mode.
pub const RESIDUAL_CEILING: f64 = 1e-6;

fn eigenpairs_for(
    op: &HelmholtzOperator,
    spec: Option<&EnclosureSpec>,
    k: usize,
    opts: &OracleOptions,
) -> Result<Vec<(f64, Vec<f64>)>> {
    let n = op.n_unknowns();
    if k == 0 {
        return Err(Error::invalid("mode count must be at least 1"));
    }
    if k > n {
        return Err(Error::invalid(format!(
            "asked for {k} modes but the grid has only {n} unknowns"
        )));
    }
    if n <= opts.dense_cutoff {
        let dense = op.csr.to_dense();
        let eig = SymmetricEigen::new(dense.clone());
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].partial_cmp(&eig.eigenvalues[b]).unwrap());
        let mut out = Vec::with_capacity(k);
        for &idx in order.iter().take(k) {
            let (lam, v) =
                polish_dense_pair(&dense, eig.eigenvalues[idx], eig.eigenvectors.column(idx).into_owned());
            out.push((lam, v.iter().copied().collect()));
        }
        return Ok(out);
    }
    let use_mg = op.disc.grid.layout == NodeLayout::VertexCentered && n >= opts.mg_threshold;
    if use_mg {
        let spec = spec.ok_or_else(|| {
            Error::invalid("multigrid hierarchy needs the enclosure geometry for coarse grids")
        })?;
        let mg = build_hierarchy(spec, op);
        solver::smallest_eigenpairs(&op.csr, &mg, k, &opts.eig)
    } else {
        solver::smallest_eigenpairs(&op.csr, &NoPrecon, k, &opts.eig)
    }
}

/// Shifted inverse iteration on a raw factorization eigenpair. The QR
/// sweep guarantees a backward error of machine roundoff on `‖A‖`, which
/// for the lowest modes of a stiff grid can leave the vector's relative
/// residual orders of magnitude above what the spectrum scale warrants;
/// the true eigenvalue lies within the residual norm of the Ritz value,
/// so shifting just below it keeps the solve bounded while amplifying the
/// target component by gap over residual. Untouched pairs return bitwise
/// identical.
fn polish_dense_pair(a: &DMatrix<f64>, mut lam: f64, mut v: DVector<f64>) -> (f64, DVector<f64>) {
    let n = a.nrows();
    for _ in 0..3 {
        let res = (a * &v - lam * &v).norm();
        if !(lam > 0.0) || res <= lam * 1e-12 {
            break;
        }
        let sigma = lam - 2.0 * res;
        let mut shifted = a.clone();
        for i in 0..n {
            shifted[(i, i)] -= sigma;
        }
        let x = match shifted.lu().solve(&v) {
            Some(x) => x,
            None => break,
        };
        let xn = x.norm();
        if !(xn > 0.0) {
            break;
        }
        v = x / xn;
        lam = (a * &v).dot(&v);
    }
    (lam, v)
}

fn fields_from_pairs(op: &HelmholtzOperator, pairs: Vec<(f64, Vec<f64>)>) -> Result<Vec<OracleField>> {
    let n = op.n_unknowns();
    let mut out = Vec::with_capacity(pairs.len());
    let mut av = vec![0.0; n];
    for (lam, mut v) in pairs {
        if !(lam > 0.0) {
            return Err(Error::solver(
                "operator produced a non-positive eigenvalue; grid is not grounded",
                lam,
            ));
        }
        let norm: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        for x in v.iter_mut() {
            *x /= norm;
        }
        op.apply(&v, &mut av);
        let res: f64 = av
            .iter()
            .zip(v.iter())
            .map(|(a, b)| (a - lam * b).powi(2))
            .sum::<f64>()
            .sqrt()
            / lam;
        if res > RESIDUAL_CEILING {
            return Err(Error::solver("eigenpair residual exceeds the acceptance ceiling", res));
        }
        // Canonical sign: largest-magnitude sample positive.
        let mut peak = 0usize;
        for (idx, x) in v.iter().enumerate() {
            if x.abs() > v[peak].abs() {
                peak = idx;
            }
        }
        if v[peak] < 0.0 {
            for x in v.iter_mut() {
                *x = -*x;
            }
        }
        let f = lam.sqrt() * C0 / (2.0 * std::f64::consts::PI * op.eps_eff.sqrt());
        out.push(OracleField {
            frequency: f,
            residual: res,
            ez: op.embed(&v),
            grid: op.disc.grid,
        });
    }
    out.sort_by(|a, b| a.frequency.partial_cmp(&b.frequency).unwrap());
    Ok(out)
}

/// Computes the `k` lowest cavity modes at grid spacing `h`.
pub fn lowest_modes(spec: &EnclosureSpec, h: f64, k: usize) -> Result<Vec<OracleField>> {
    lowest_modes_with(spec, h, k, &OracleOptions::default())
}

/// [`lowest_modes`] with explicit solver options.
pub fn lowest_modes_with(
    spec: &EnclosureSpec,
    h: f64,
    k: usize,
    opts: &OracleOptions,
) -> Result<Vec<OracleField>> {
    let op = assemble_operator(spec, h)?;
    let pairs = eigenpairs_for(&op, Some(spec), k, opts)?;
    fields_from_pairs(&op, pairs)
}

/// Fundamental of the infinite shunt lattice: one all-Neumann unit cell
/// with the post disk grounded. `r = 0` leaves the cell unperturbed and the
/// fundamental is the constant mode at zero frequency.
pub fn infinite_lattice_fundamental(a: f64, r: f64, eps_r: f64, h: f64) -> Result<f64> {
    if !(eps_r >= 1.0) || !eps_r.is_finite() {
        return Err(Error::invalid(format!(
            "relative permittivity must be >= 1 and finite, got {eps_r}"
        )));
    }
    if r == 0.0 {
        // Validate the remaining arguments even on the trivial path.
        discretize_unit_cell(a, r, h)?;
        return Ok(0.0);
    }
    let disc = discretize_unit_cell(a, r, h)?;
    let op = operator_from_discretization(disc, eps_r)?;
    let opts = OracleOptions::default();
    let pairs = eigenpairs_for(&op, None, 1, &opts)?;
    let fields = fields_from_pairs(&op, pairs)?;
    Ok(fields[0].frequency)
}

/// Grid refinement study of the fundamental mode.
#[derive(Debug, Clone)]
pub struct ConvergenceStudy {
    /// `(actual grid spacing, fundamental frequency)` per level, coarse to
    /// fine.
    pub levels: Vec<(f64, f64)>,
    /// Richardson extrapolation from the two finest levels.
    pub extrapolated: f64,
    /// Observed convergence order from the last three levels; `None` with
    /// fewer than three levels or a degenerate difference ratio.
    pub observed_order: Option<f64>,
    /// Whether the frequency sequence is strictly monotone across levels.
    pub monotone: bool,
}

/// Runs the fundamental mode over a sequence of grid spacings and estimates
/// the convergence order and the zero-spacing limit. At least two spacings
/// are required; they are sorted coarse-to-fine internally.
pub fn convergence_study(spec: &EnclosureSpec, spacings: &[f64]) -> Result<ConvergenceStudy> {
    if spacings.len() < 2 {
        return Err(Error::invalid("a refinement study needs at least two grid spacings"));
    }
    let mut hs = spacings.to_vec();
    hs.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let mut levels = Vec::with_capacity(hs.len());
    for &h in &hs {
        let modes = lowest_modes(spec, h, 1)?;
        let g = modes[0].grid;
        levels.push(((g.hx * g.hy).sqrt(), modes[0].frequency));
    }

    let n = levels.len();
    let observed_order = if n >= 3 {
        let (h1, f1) = levels[n - 3];
        let (h2, f2) = levels[n - 2];
        let (_h3, f3) = levels[n - 1];
        let e12 = f2 - f1;
        let e23 = f3 - f2;
        let ratio = h1 / h2;
        if e12 * e23 > 0.0 && ratio > 1.0 {
            Some((e12 / e23).ln() / ratio.ln())
        } else {
            None
        }
    } else {
        None
    };

    let (h2, f2) = levels[n - 2];
    let (h3, f3) = levels[n - 1];
    let p = observed_order.unwrap_or(2.0);
    let rp = (h2 / h3).powf(p);
    let extrapolated = if rp > 1.0 { f3 + (f3 - f2) / (rp - 1.0) } else { f3 };

    let mut monotone = true;
    for w in levels.windows(2) {
        if !((w[1].1 - w[0].1) * (levels[1].1 - levels[0].1) > 0.0) {
            monotone = false;
        }
    }

    Ok(ConvergenceStudy {
        levels,
        extrapolated,
        observed_order,
        monotone,
    })
}

/// Default grid spacing for an enclosure: fine enough to resolve the post
/// radius, the gap between posts, and the lattice pitch, but floored so the
/// grid stays within about four million nodes.
pub fn default_resolution(spec: &EnclosureSpec) -> Result<f64> {
    spec.check()?;
    let r = spec.shunt_radius;
    let a = spec.shunt_spacing;
    let has_lattice = r > 0.0 && spec.shunt_counts.0 > 0 && spec.shunt_counts.1 > 0;
    let mut h = if has_lattice {
        (a / 16.0).min((a - 2.0 * r) / 16.0).min(r / 2.0)
    } else {
        spec.lx.min(spec.ly) / 64.0
    };
    let floor = (spec.lx * spec.ly / 4.0e6).sqrt();
    if h < floor {
        h = floor;
    }
    Ok(h.min(spec.lx.min(spec.ly) / 8.0))
}

/// Builds the rediscretized multigrid hierarchy below a fine vertex grid.
fn build_hierarchy(spec: &EnclosureSpec, fine: &HelmholtzOperator) -> Multigrid {
    let mut coarse_ops: Vec<HelmholtzOperator> = Vec::new();
    loop {
        let cur = coarse_ops.last().unwrap_or(fine);
        let g = cur.disc.grid;
        if g.nx % 2 != 0 || g.ny % 2 != 0 || cur.n_unknowns() <= MG_COARSEST {
            break;
        }
        let disc = build_vertex_disc(spec, g.nx / 2, g.ny / 2);
        match operator_from_discretization(disc, fine.eps_eff) {
            Ok(op) => coarse_ops.push(op),
            Err(_) => break, // coarse grid fully masked: stop coarsening
        }
    }
    let n_levels = coarse_ops.len() + 1;
    let op_at = |i: usize| -> &HelmholtzOperator {
        if i == 0 {
            fine
        } else {
            &coarse_ops[i - 1]
        }
    };

    let mut levels = Vec::with_capacity(n_levels);
    for li in 0..n_levels {
        let op = op_at(li);
        let g = op.disc.grid;
        let nxn = g.nodes_x();
        let n = op.n_unknowns();
        let mut red = Vec::new();
        let mut black = Vec::new();
        for u in 0..n {
            let node = op.node_of[u] as usize;
            let (i, j) = (node % nxn, node / nxn);
            if (i + j) % 2 == 0 {
                red.push(u as u32);
            } else {
                black.push(u as u32);
            }
        }

        let prolong = if li + 1 < n_levels {
            let coarse = op_at(li + 1);
            let cnxn = coarse.disc.grid.nodes_x();
            let mut rows = Vec::with_capacity(n);
            for u in 0..n {
                let node = op.node_of[u] as usize;
                let (i, j) = (node % nxn, node / nxn);
                let mut row: Vec<(u32, f32)> = Vec::with_capacity(4);
                let mut push = |ci: usize, cj: usize, w: f32| {
                    let cnode = cj * cnxn + ci;
                    let cu = coarse.index_of[cnode];
                    if cu != u32::MAX {
                        row.push((cu, w));
                    }
                };
                match (i % 2, j % 2) {
                    (0, 0) => push(i / 2, j / 2, 1.0),
                    (1, 0) => {
                        push(i / 2, j / 2, 0.5);
                        push(i / 2 + 1, j / 2, 0.5);
                    }
                    (0, 1) => {
                        push(i / 2, j / 2, 0.5);
                        push(i / 2, j / 2 + 1, 0.5);
                    }
                    _ => {
                        push(i / 2, j / 2, 0.25);
                        push(i / 2 + 1, j / 2, 0.25);
                        push(i / 2, j / 2 + 1, 0.25);
                        push(i / 2 + 1, j / 2 + 1, 0.25);
                    }
                }
                rows.push(row);
            }
            rows
        } else {
            Vec::new()
        };

        levels.push(MgLevel {
            diag: op.csr.diagonal(),
            a: op.csr.clone(),
            red,
            black,
            prolong,
        });
    }
    Multigrid::new(levels)
}
