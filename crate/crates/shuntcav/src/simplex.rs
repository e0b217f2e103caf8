//! Minimal Nelder-Mead simplex minimizer used by the parameter fits.
//!
//! Standard coefficients (reflection 1, expansion 2, contraction 1/2,
//! shrink 1/2) and a restart loop: each restart rebuilds the simplex
//! around the best point with shrunken steps, which polishes the optimum
//! well past the single-run stall scale.

pub(crate) struct SimplexOptions {
    pub max_evals: usize,
    /// Converged when the simplex's relative function spread falls below
    /// this.
    pub ftol: f64,
    /// ... and its relative coordinate spread below this.
    pub xtol: f64,
    pub restarts: usize,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        SimplexOptions {
            max_evals: 20_000,
            ftol: 1e-14,
            xtol: 1e-12,
            restarts: 3,
        }
    }
}

pub(crate) struct SimplexResult {
    pub x: Vec<f64>,
    pub fx: f64,
    pub evals: usize,
    pub converged: bool,
}

pub(crate) fn minimize<F: FnMut(&[f64]) -> f64>(
    mut f: F,
    x0: &[f64],
    step: &[f64],
    opts: &SimplexOptions,
) -> SimplexResult {
    assert_eq!(x0.len(), step.len());
    let n = x0.len();
    let mut evals = 0usize;
    let mut best = x0.to_vec();
    let mut best_f = f(&best);
    evals += 1;
    let mut converged = false;

    let mut scale = 1.0;
    for _ in 0..=opts.restarts {
        let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
        let mut values: Vec<f64> = Vec::with_capacity(n + 1);
        simplex.push(best.clone());
        values.push(best_f);
        for i in 0..n {
            let mut p = best.clone();
            let s = step[i] * scale;
            p[i] += if s != 0.0 { s } else { 1e-8 };
            values.push(f(&p));
            evals += 1;
            simplex.push(p);
        }

        loop {
            if evals >= opts.max_evals {
                break;
            }
            // Order: index of best, worst, second worst.
            let mut lo = 0;
            let mut hi = 0;
            let mut hi2 = 0;
            for i in 1..=n {
                if values[i] < values[lo] {
                    lo = i;
                }
                if values[i] > values[hi] {
                    hi2 = hi;
                    hi = i;
                } else if values[i] > values[hi2] && i != hi {
                    hi2 = i;
                }
            }

            let f_spread = (values[hi] - values[lo]).abs();
            let f_scale = values[hi].abs().max(values[lo].abs()).max(1e-300);
            let mut x_spread = 0.0f64;
            for i in 0..=n {
                for d in 0..n {
                    let diff = (simplex[i][d] - simplex[lo][d]).abs();
                    let sc = simplex[lo][d].abs().max(1e-300);
                    x_spread = x_spread.max(diff / sc);
                }
            }
            if f_spread <= opts.ftol * f_scale && x_spread <= opts.xtol {
                converged = true;
                break;
            }

            // Centroid of all but the worst.
            let mut centroid = vec![0.0; n];
            for (i, p) in simplex.iter().enumerate() {
                if i == hi {
                    continue;
                }
                for d in 0..n {
                    centroid[d] += p[d];
                }
            }
            for c in centroid.iter_mut() {
                *c /= n as f64;
            }

            let point_along = |t: f64, from: &[f64]| -> Vec<f64> {
                (0..n).map(|d| centroid[d] + t * (from[d] - centroid[d])).collect()
            };

            let reflected = point_along(-1.0, &simplex[hi]);
            let f_reflected = f(&reflected);
            evals += 1;

            if f_reflected < values[lo] {
                let expanded = point_along(-2.0, &simplex[hi]);
                let f_expanded = f(&expanded);
                evals += 1;
                if f_expanded < f_reflected {
                    simplex[hi] = expanded;
                    values[hi] = f_expanded;
                } else {
                    simplex[hi] = reflected;
                    values[hi] = f_reflected;
                }
            } else if f_reflected < values[hi2] {
                simplex[hi] = reflected;
                values[hi] = f_reflected;
            } else {
                let contracted = if f_reflected < values[hi] {
                    point_along(-0.5, &simplex[hi])
                } else {
                    point_along(0.5, &simplex[hi])
                };
                let f_contracted = f(&contracted);
                evals += 1;
                if f_contracted < values[hi].min(f_reflected) {
                    simplex[hi] = contracted;
                    values[hi] = f_contracted;
                } else {
                    // Shrink toward the best vertex.
                    let lo_point = simplex[lo].clone();
                    for i in 0..=n {
                        if i == lo {
                            continue;
                        }
                        for d in 0..n {
                            simplex[i][d] = 0.5 * (simplex[i][d] + lo_point[d]);
                        }
                        values[i] = f(&simplex[i]);
                        evals += 1;
                    }
                }
            }
        }

        let mut lo = 0;
        for i in 1..=n {
            if values[i] < values[lo] {
                lo = i;
            }
        }
        if values[lo] < best_f {
            best_f = values[lo];
            best = simplex[lo].clone();
        }
        scale *= 0.1;
        if evals >= opts.max_evals {
            break;
        }
    }

    SimplexResult {
        x: best,
        fx: best_f,
        evals,
        converged,
    }
}
