//! Bracketed scalar root refinement.

/// Outcome of a bisection run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bisection {
    pub root: f64,
    /// Final bracket; `f` changes sign (or vanishes) between the two ends.
    pub lo: f64,
    pub hi: f64,
    pub iterations: usize,
}

/// Refines a sign change of `f` on `[lo, hi]` until the bracket is narrower
/// than `width_tol`, `f` vanishes exactly, or `max_iter` halvings were made.
///
/// Returns `None` when `f(lo)` and `f(hi)` have the same strict sign.
pub fn bisect<F>(
    mut f: F,
    mut lo: f64,
    mut hi: f64,
    width_tol: f64,
    max_iter: usize,
) -> Option<Bisection>
where
    F: FnMut(f64) -> f64,
{
    let mut f_lo = f(lo);
    let f_hi = f(hi);
    if f_lo == 0.0 {
        return Some(Bisection {
            root: lo,
            lo,
            hi: lo,
            iterations: 0,
        });
    }
    if f_hi == 0.0 {
        return Some(Bisection {
            root: hi,
            lo: hi,
            hi,
            iterations: 0,
        });
    }
    if f_lo.signum() == f_hi.signum() || f_lo.is_nan() || f_hi.is_nan() {
        return None;
    }
    let mut iterations = 0;
    while (hi - lo) > width_tol && iterations < max_iter {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        iterations += 1;
        let f_mid = f(mid);
        if f_mid == 0.0 {
            return Some(Bisection {
                root: mid,
                lo: mid,
                hi: mid,
                iterations,
            });
        }
        if f_mid.signum() == f_lo.signum() {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    Some(Bisection {
        root: 0.5 * (lo + hi),
        lo,
        hi,
        iterations,
    })
}

/// Golden-section search for a minimum of `f` on `[lo, hi]`.
///
/// Returns `(argmin, min)`.
pub fn golden_min<F>(mut f: F, mut lo: f64, mut hi: f64, width_tol: f64) -> (f64, f64)
where
    F: FnMut(f64) -> f64,
{
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    for _ in 0..400 {
        if hi - lo <= width_tol {
            break;
        }
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = f(x2);
        }
    }
    if f1 <= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}
