//! Linear algebra kernels for the field oracle: CSR matrices, conjugate
//! gradients with an optional geometric-multigrid preconditioner, and a
//! thick-restart Lanczos eigensolver on the inverse operator.
//!
//! Everything here is strictly serial and deterministic: fixed seeds, no
//! threading, no iteration-order ambiguity — repeated runs produce
//! bit-identical spectra.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::{Error, Result};

/// Compressed sparse rows with sorted column indices per row.
#[derive(Debug, Clone)]
pub struct Csr {
    pub nrows: usize,
    pub rowp: Vec<u32>,
    pub cols: Vec<u32>,
    pub vals: Vec<f64>,
}

impl Csr {
    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.nrows);
        debug_assert_eq!(y.len(), self.nrows);
        for row in 0..self.nrows {
            let lo = self.rowp[row] as usize;
            let hi = self.rowp[row + 1] as usize;
            let mut acc = 0.0;
            for k in lo..hi {
                acc += self.vals[k] * x[self.cols[k] as usize];
            }
            y[row] = acc;
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.nrows];
        for row in 0..self.nrows {
            for k in self.rowp[row] as usize..self.rowp[row + 1] as usize {
                if self.cols[k] as usize == row {
                    d[row] = self.vals[k];
                }
            }
        }
        d
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.nrows, self.nrows);
        for row in 0..self.nrows {
            for k in self.rowp[row] as usize..self.rowp[row + 1] as usize {
                m[(row, self.cols[k] as usize)] = self.vals[k];
            }
        }
        m
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Preconditioner interface: `apply` approximates `A^{-1} r`. Must act as a
/// fixed symmetric positive-definite linear operator for CG to converge.
pub trait Preconditioner {
    fn apply(&self, r: &[f64], z: &mut [f64]);
}

/// Identity preconditioner (plain CG).
pub struct NoPrecon;

impl Preconditioner for NoPrecon {
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        z.copy_from_slice(r);
    }
}

/// Preconditioned conjugate gradients, absolute tolerance on the true
/// residual. Restarts from the current iterate up to 3 times if the
/// recursive residual drifted from the true one. A solve that stalls at the
/// floating-point attainable floor `~eps (||A|| ||x|| + ||b||)` counts as
/// converged: no Krylov method can push the true residual below it.
pub fn pcg(a: &Csr, b: &[f64], x: &mut [f64], m: &dyn Preconditioner, tol: f64, max_iter: usize) -> Result<f64> {
    let n = a.nrows;
    let mut r = vec![0.0; n];
    let mut z = vec![0.0; n];
    let mut p = vec![0.0; n];
    let mut ap = vec![0.0; n];

    let mut gersh = 0.0f64;
    for row in 0..n {
        let s: f64 = (a.rowp[row] as usize..a.rowp[row + 1] as usize)
            .map(|k| a.vals[k].abs())
            .sum();
        gersh = gersh.max(s);
    }
    let b_norm = norm(b);
    let floor = |x_norm: f64| 2.0 * f64::EPSILON * (gersh * x_norm + b_norm);

    for _restart in 0..=3 {
        a.matvec(x, &mut r);
        for i in 0..n {
            r[i] = b[i] - r[i];
        }
        let mut res = norm(&r);
        if res <= tol.max(floor(norm(x))) {
            return Ok(res);
        }
        m.apply(&r, &mut z);
        p.copy_from_slice(&z);
        let mut rz = dot(&r, &z);
        for _ in 0..max_iter {
            a.matvec(&p, &mut ap);
            let pap = dot(&p, &ap);
            if !(pap > 0.0) {
                return Err(Error::solver(
                    "conjugate gradients hit a non-positive curvature direction; operator is not positive definite",
                    pap,
                ));
            }
            let alpha = rz / pap;
            for i in 0..n {
                x[i] += alpha * p[i];
                r[i] -= alpha * ap[i];
            }
            res = norm(&r);
            if res <= tol {
                break;
            }
            m.apply(&r, &mut z);
            let rz_new = dot(&r, &z);
            let beta = rz_new / rz;
            rz = rz_new;
            for i in 0..n {
                p[i] = z[i] + beta * p[i];
            }
        }
        // True-residual check; loop restarts CG if rounding drifted.
        a.matvec(x, &mut r);
        for i in 0..n {
            r[i] = b[i] - r[i];
        }
        res = norm(&r);
        if res <= tol.max(floor(norm(x))) {
            return Ok(res);
        }
    }
    let mut r2 = vec![0.0; n];
    a.matvec(x, &mut r2);
    for i in 0..n {
        r2[i] = b[i] - r2[i];
    }
    let achieved = norm(&r2);
    Err(Error::solver(
        "conjugate gradients failed to reach the requested residual",
        achieved,
    ))
}

/// One level of the geometric multigrid hierarchy.
pub struct MgLevel {
    pub a: Csr,
    pub diag: Vec<f64>,
    /// Red/black coloring by grid-coordinate parity, as unknown indices.
    pub red: Vec<u32>,
    pub black: Vec<u32>,
    /// Bilinear interpolation rows: for each fine unknown, up to 4
    /// (coarse unknown, weight) pairs. Masked coarse parents are dropped.
    /// Restriction is full weighting, `R = P^T / 4`, which keeps the
    /// correction consistently scaled against rediscretized coarse operators.
    pub prolong: Vec<Vec<(u32, f32)>>,
}

/// Symmetric V(1,1) geometric multigrid used as a CG preconditioner.
/// Pre-smoothing sweeps red then black; post-smoothing black then red, so
/// the cycle is its own adjoint. The coarsest level is solved by plain CG.
pub struct Multigrid {
    pub levels: Vec<MgLevel>,
    coarse_tol: f64,
}

impl Multigrid {
    pub fn new(levels: Vec<MgLevel>) -> Self {
        Multigrid { levels, coarse_tol: 1e-12 }
    }

    fn smooth(&self, level: usize, x: &mut [f64], b: &[f64], order_red_first: bool) {
        let l = &self.levels[level];
        let lists: [&Vec<u32>; 2] = if order_red_first { [&l.red, &l.black] } else { [&l.black, &l.red] };
        for list in lists {
            for &ui in list {
                let row = ui as usize;
                let lo = l.a.rowp[row] as usize;
                let hi = l.a.rowp[row + 1] as usize;
                let mut acc = b[row];
                for k in lo..hi {
                    let c = l.a.cols[k] as usize;
                    if c != row {
                        acc -= l.a.vals[k] * x[c];
                    }
                }
                x[row] = acc / l.diag[row];
            }
        }
    }

    fn vcycle(&self, level: usize, b: &[f64], x: &mut [f64]) {
        let nl = self.levels.len();
        let l = &self.levels[level];
        let n = l.a.nrows;
        if level == nl - 1 {
            // Coarsest: plain CG to a tight tolerance. The coarse operator
            // is well conditioned (large h), so this stays cheap.
            for v in x.iter_mut() {
                *v = 0.0;
            }
            let scale = norm(b).max(1e-300);
            let _ = pcg(&l.a, b, x, &NoPrecon, self.coarse_tol * scale, 40 * n.max(50));
            return;
        }
        for v in x.iter_mut() {
            *v = 0.0;
        }
        self.smooth(level, x, b, true);

        // Residual restriction: r_c = P^T (b - A x).
        let mut r = vec![0.0; n];
        l.a.matvec(x, &mut r);
        for i in 0..n {
            r[i] = b[i] - r[i];
        }
        let nc = self.levels[level + 1].a.nrows;
        let mut rc = vec![0.0; nc];
        for (fine, row) in l.prolong.iter().enumerate() {
            let rf = 0.25 * r[fine];
            for &(coarse, w) in row {
                rc[coarse as usize] += w as f64 * rf;
            }
        }

        let mut ec = vec![0.0; nc];
        self.vcycle(level + 1, &rc, &mut ec);

        for (fine, row) in l.prolong.iter().enumerate() {
            let mut add = 0.0;
            for &(coarse, w) in row {
                add += w as f64 * ec[coarse as usize];
            }
            x[fine] += add;
        }
        self.smooth(level, x, b, false);
    }
}

impl Preconditioner for Multigrid {
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        self.vcycle(0, r, z);
    }
}

/// Deterministic pseudo-random stream for the Lanczos start vector.
struct SplitMix64(u64);

impl SplitMix64 {
    fn next_f64(&mut self) -> f64 {
        self.0 = self.0.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^= z >> 31;
        // Uniform in (-1, 1).
        (z >> 11) as f64 / (1u64 << 52) as f64 - 1.0
    }
}

/// Options for the inverse-operator Lanczos eigensolver.
#[derive(Debug, Clone, Copy)]
pub struct EigOptions {
    /// Relative Ritz-residual tolerance on the inverse-operator pairs.
    pub ritz_tol: f64,
    /// Absolute CG tolerance for the inner solves (unit right-hand sides).
    pub cg_tol: f64,
    /// Maximum restart cycles before giving up.
    pub max_cycles: usize,
}

impl Default for EigOptions {
    fn default() -> Self {
        // ritz_tol sits an order above the inner-solve noise floor; the
        // explicit algebraic-residual ceiling on returned pairs is the
        // actual acceptance gate.
        EigOptions { ritz_tol: 1e-10, cg_tol: 1e-12, max_cycles: 80 }
    }
}

/// Computes the `k` smallest eigenpairs of the SPD operator `a` by
/// thick-restart Lanczos on `B = A^{-1}` (each expansion is one inner CG
/// solve, optionally multigrid-preconditioned). Returns `(lambda, v)`
/// pairs sorted ascending; eigenvectors have unit norm.
///
/// A single Krylov sequence carries at most one copy of each eigenspace,
/// so repeated eigenvalues (square layouts produce exactly degenerate
/// pairs) would silently drop copies. After the first pass the deflated
/// complement is probed with fresh start vectors until it stops producing
/// values at or below the current k-th.
pub fn smallest_eigenpairs(
    a: &Csr,
    m: &dyn Preconditioner,
    k: usize,
    opts: &EigOptions,
) -> Result<Vec<(f64, Vec<f64>)>> {
    let n = a.nrows;
    if k == 0 {
        return Ok(Vec::new());
    }
    if k > n {
        return Err(Error::invalid(format!("asked for {k} modes of a {n}-unknown operator")));
    }
    let mut found = lanczos_pass(a, m, k, opts, &[], 0)?;
    // k = 1 needs no probe: the lowest value is correct even when its
    // eigenspace is degenerate, and one copy is all that was asked for.
    if k > 1 {
        // Four sweeps resolve multiplicities up to five; the symmetry
        // group of a rectangular layout never produces more than two.
        for sweep in 1..=4u64 {
            let avail = n - found.len();
            if avail == 0 {
                break;
            }
            let kth = found[k - 1].0;
            let probe = lanczos_pass(a, m, 2.min(avail), opts, &found, sweep)?;
            let new_low = probe.iter().any(|p| p.0 <= kth * (1.0 + 1e-8));
            found.extend(probe);
            found.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap());
            if !new_low {
                break;
            }
        }
        found.truncate(k);
    }
    Ok(found)
}

/// One thick-restart Lanczos pass on `B = A^{-1}`, kept orthogonal to the
/// `locked` pairs' vectors throughout, so the pass converges on the
/// spectrum of the deflated complement. `salt` decorrelates the
/// deterministic start vector between passes.
fn lanczos_pass(
    a: &Csr,
    m: &dyn Preconditioner,
    k: usize,
    opts: &EigOptions,
    locked: &[(f64, Vec<f64>)],
    salt: u64,
) -> Result<Vec<(f64, Vec<f64>)>> {
    let n = a.nrows;
    let avail = n - locked.len();
    if k > avail {
        return Err(Error::invalid(format!(
            "asked for {k} modes of a {avail}-dimensional deflated operator"
        )));
    }

    let max_basis = avail.min((5 * k + 40).max(48));
    let keep = (k + 15).min(max_basis.saturating_sub(4)).max(k);

    let deflate = |v: &mut [f64]| {
        for (_, lv) in locked {
            let c = dot(lv, v);
            if c != 0.0 {
                for (vv, qv) in v.iter_mut().zip(lv.iter()) {
                    *vv -= c * qv;
                }
            }
        }
    };

    // Deterministic start vector.
    let mut rng =
        SplitMix64(0x9E37_79B9_7F4A_7C15 ^ n as u64 ^ salt.wrapping_mul(0xD1B5_4A32_D192_ED03));
    let mut q0 = vec![0.0; n];
    loop {
        for v in q0.iter_mut() {
            *v = rng.next_f64();
        }
        deflate(&mut q0);
        deflate(&mut q0);
        let q0n = norm(&q0);
        if q0n > 1e-8 {
            for v in q0.iter_mut() {
                *v /= q0n;
            }
            break;
        }
    }

    let mut basis: Vec<Vec<f64>> = vec![q0];
    let mut t = DMatrix::<f64>::zeros(max_basis + 1, max_basis + 1);
    let mut expanded = 0usize; // complete columns of T
    // Norm of the newest basis vector's unorthogonalized remainder: the
    // escape coefficient out of the completed block. T itself is filled
    // purely by the Gram-Schmidt coefficients, so nothing is counted twice.
    let mut beta_last;
    let mut prev_theta: Vec<f64> = Vec::new();
    let mut cg_iters_budget = 0usize;

    let solve_b = |q: &[f64], out: &mut Vec<f64>| -> Result<()> {
        out.clear();
        out.resize(n, 0.0);
        pcg(a, q, out, m, opts.cg_tol, 50_000)?;
        Ok(())
    };

    let mut w = Vec::new();
    for _cycle in 0..opts.max_cycles {
        // Expand until the basis fills or convergence is detected at a
        // checkpoint.
        let mut converged: Option<(Vec<f64>, DMatrix<f64>)> = None;
        while expanded < max_basis {
            let j = expanded;
            solve_b(&basis[j], &mut w)?;
            cg_iters_budget += 1;
            // Classical Gram-Schmidt, two passes, coefficients into T.
            // The inner solve leaks a little of the locked eigenspaces back
            // in, so every pass re-deflates before touching the basis.
            for _pass in 0..2 {
                deflate(&mut w);
                for (i, qi) in basis.iter().enumerate() {
                    let c = dot(qi, &w);
                    if c != 0.0 {
                        for (wv, qv) in w.iter_mut().zip(qi.iter()) {
                            *wv -= c * qv;
                        }
                        t[(i, j)] += c;
                        t[(j, i)] = t[(i, j)];
                    }
                }
            }
            let beta = norm(&w);
            let scale = t[(j, j)].abs().max(1e-300);
            let mut dead_end = false;
            if beta <= 1e-14 * scale || basis.len() == avail {
                // Invariant subspace: the block is exact.
                beta_last = 0.0;
                expanded += 1;
                if basis.len() < avail {
                    // Continue with a fresh deterministic direction
                    // orthogonal to the basis.
                    let mut f: Vec<f64> = (0..n).map(|_| rng.next_f64()).collect();
                    for _pass in 0..2 {
                        deflate(&mut f);
                        for qi in basis.iter() {
                            let c = dot(qi, &f);
                            for (fv, qv) in f.iter_mut().zip(qi.iter()) {
                                *fv -= c * qv;
                            }
                        }
                    }
                    let fn_ = norm(&f);
                    if fn_ < 1e-150 {
                        dead_end = true;
                    } else {
                        for v in f.iter_mut() {
                            *v /= fn_;
                        }
                        basis.push(f);
                    }
                } else {
                    dead_end = true;
                }
            } else {
                let mut q_next = std::mem::take(&mut w);
                for v in q_next.iter_mut() {
                    *v /= beta;
                }
                basis.push(q_next);
                beta_last = beta;
                expanded += 1;
            }

            let at_capacity = expanded == max_basis;
            let checkpoint = expanded % 3 == 0 || at_capacity || expanded == avail || dead_end;
            if !checkpoint {
                continue;
            }
            let block = t.view((0, 0), (expanded, expanded)).into_owned();
            let eig = SymmetricEigen::new(block);
            // Sort descending in theta: largest 1/lambda = smallest lambda.
            let mut order: Vec<usize> = (0..expanded).collect();
            order.sort_by(|&x, &y| eig.eigenvalues[y].partial_cmp(&eig.eigenvalues[x]).unwrap());
            // A dead end means the basis is exactly invariant, so the block
            // spectrum carries no projection error.
            let exact_block = expanded == avail || dead_end;
            let mut all_ok = true;
            for (rank, &oi) in order.iter().take(k).enumerate() {
                let theta = eig.eigenvalues[oi];
                if !(theta > 0.0) {
                    all_ok = false;
                    break;
                }
                let est = (beta_last * eig.eigenvectors[(expanded - 1, oi)]).abs();
                let drift_ok = prev_theta
                    .get(rank)
                    .map(|&p| (theta - p).abs() <= opts.ritz_tol * theta.abs())
                    .unwrap_or(false);
                if !exact_block && !(est <= opts.ritz_tol * theta && drift_ok) {
                    all_ok = false;
                }
            }
            prev_theta = order
                .iter()
                .take(k)
                .map(|&oi| eig.eigenvalues[oi])
                .collect();
            if all_ok {
                let thetas: Vec<f64> = order.iter().map(|&oi| eig.eigenvalues[oi]).collect();
                let mut s = DMatrix::zeros(expanded, expanded);
                for (col, &oi) in order.iter().enumerate() {
                    for row in 0..expanded {
                        s[(row, col)] = eig.eigenvectors[(row, oi)];
                    }
                }
                converged = Some((thetas, s));
                break;
            }
            if dead_end {
                return Err(Error::solver(
                    "eigensolver stalled on an invariant subspace missing the requested modes",
                    f64::NAN,
                ));
            }
            if at_capacity {
                // Thick restart: keep the best `keep` Ritz vectors plus the
                // carry vector; T collapses to diag(theta), and the coupling
                // row is recovered by the next expansion's reorthogonalization.
                let kept: Vec<usize> = order.iter().take(keep).copied().collect();
                let carry = basis.pop().unwrap(); // q_expanded, unexpanded
                let mut new_basis: Vec<Vec<f64>> = Vec::with_capacity(keep + 1);
                for &oi in &kept {
                    let mut y = vec![0.0; n];
                    for (row, qrow) in basis.iter().enumerate() {
                        let c = eig.eigenvectors[(row, oi)];
                        if c != 0.0 {
                            for (yv, qv) in y.iter_mut().zip(qrow.iter()) {
                                *yv += c * qv;
                            }
                        }
                    }
                    new_basis.push(y);
                }
                new_basis.push(carry);
                basis = new_basis;
                t.fill(0.0);
                for (i, &oi) in kept.iter().enumerate() {
                    t[(i, i)] = eig.eigenvalues[oi];
                }
                expanded = keep;
                prev_theta.clear();
                break;
            }
        }

        if let Some((thetas, s)) = converged {
            let dim = s.nrows();
            let mut out = Vec::with_capacity(k);
            for col in 0..k {
                let theta = thetas[col];
                if !(theta > 0.0) {
                    return Err(Error::solver(
                        "inverse-operator Lanczos produced a non-positive Ritz value",
                        theta,
                    ));
                }
                let mut v = vec![0.0; n];
                for row in 0..dim {
                    let c = s[(row, col)];
                    if c != 0.0 {
                        for (vv, qv) in v.iter_mut().zip(basis[row].iter()) {
                            *vv += c * qv;
                        }
                    }
                }
                let vn = norm(&v);
                for x in v.iter_mut() {
                    *x /= vn;
                }
                out.push((1.0 / theta, v));
            }
            out.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
            let _ = cg_iters_budget;
            return Ok(out);
        }
    }
    Err(Error::solver(
        "eigensolver exhausted its restart budget without converging",
        f64::NAN,
    ))
}
