//! Independent quadrature reference for the modified Bessel functions of
//! the second kind. Test suites use these as oracle values; nothing here
//! shares code or expansions with the library implementation under test.

/// `K_nu(x)` for `nu` in `{0, 1}` via adaptive Simpson quadrature of
///
/// `K_nu(x) = e^{-x} * integral_0^T e^{-x (cosh t - 1)} cosh(nu t) dt`,
///
/// truncated where the decay factor falls below `e^{-60}`. `rel_tol` is the
/// requested relative accuracy of the integral; values down near the f64
/// underflow edge stay accurate because the `e^{-x}` prefactor is split out.
pub fn bessel_k_reference(nu: u8, x: f64, rel_tol: f64) -> f64 {
    assert!(nu <= 1, "only orders 0 and 1 have test oracles");
    assert!(x > 0.0 && x.is_finite(), "need finite x > 0, got {x}");
    assert!(rel_tol > 0.0);
    let target = 1.0 + 60.0 / x;
    let t_max = (target + (target * target - 1.0).sqrt()).ln();
    let f = |t: f64| -> f64 {
        let c = t.cosh();
        let decay = (-x * (c - 1.0)).exp();
        if nu == 0 {
            decay
        } else {
            decay * c
        }
    };
    // Crude bracket first, then refine against an absolute tolerance scaled
    // to it; the scaled integrand is O(1) so this is well-conditioned.
    let crude = adaptive_simpson(&f, 0.0, t_max, 1e-4);
    let scaled = adaptive_simpson(&f, 0.0, t_max, rel_tol * crude.abs());
    (-x).exp() * scaled
}

/// Adaptive Simpson with Richardson correction; `tol` is absolute.
pub fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson(fa: f64, fm: f64, fb: f64, span: f64) -> f64 {
        span / 6.0 * (fa + 4.0 * fm + fb)
    }
    #[allow(clippy::too_many_arguments)]
    fn recurse(
        f: &dyn Fn(f64) -> f64,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = simpson(fa, flm, fm, m - a);
        let right = simpson(fm, frm, fb, b - m);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        recurse(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
            + recurse(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
    let m = 0.5 * (a + b);
    let fa = f(a);
    let fm = f(m);
    let fb = f(b);
    let whole = simpson(fa, fm, fb, b - a);
    recurse(f, a, b, fa, fm, fb, whole, tol, 48)
}
