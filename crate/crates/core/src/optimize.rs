//! One-dimensional minimization used by the fitting routines: golden-section
//! search, optionally preceded by a coarse grid pass when the objective has
//! several local minima (the Rabi residual is oscillatory in the fit
//! parameter).

/// Golden-section search for a minimum of `f` on `[lo, hi]`, assuming `f`
/// is unimodal there. Returns `(x, f(x))`. The bracket endpoints themselves
/// are also compared, so boundary minima are returned exactly.
pub(crate) fn golden_section_min(
    f: impl Fn(f64) -> f64,
    lo: f64,
    hi: f64,
    tol_x: f64,
) -> (f64, f64) {
    debug_assert!(lo <= hi);
    if lo == hi {
        return (lo, f(lo));
    }
    const INVPHI: f64 = 0.618_033_988_749_894_8;
    let (mut a, mut b) = (lo, hi);
    let mut c = b - INVPHI * (b - a);
    let mut d = a + INVPHI * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > tol_x {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INVPHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INVPHI * (b - a);
            fd = f(d);
        }
    }
    let mut best = if fc <= fd { (c, fc) } else { (d, fd) };
    for x in [lo, hi] {
        let fx = f(x);
        if fx < best.1 {
            best = (x, fx);
        }
    }
    best
}

/// Minimize a possibly multimodal `f` on `[lo, hi]`: scan `n_grid` equally
/// spaced points, take the best (ties resolved towards the smallest
/// argument), and refine by golden-section within the neighbouring cells.
pub(crate) fn grid_then_golden_min(
    f: impl Fn(f64) -> f64,
    lo: f64,
    hi: f64,
    n_grid: usize,
    tol_x: f64,
) -> (f64, f64) {
    debug_assert!(n_grid >= 2 && lo < hi);
    let step = (hi - lo) / (n_grid - 1) as f64;
    let mut best_i = 0;
    let mut best_f = f64::INFINITY;
    for i in 0..n_grid {
        let fx = f(lo + step * i as f64);
        if fx < best_f {
            best_f = fx;
            best_i = i;
        }
    }
    let a = lo + step * best_i.saturating_sub(1) as f64;
    let b = (lo + step * (best_i + 1) as f64).min(hi);
    golden_section_min(f, a, b, tol_x)
}
