//! Bracketing root finder shared by the sweeps.

use crate::error::{Error, Result};

pub const DEFAULT_MAX_ITER: usize = 200;

/// Bisection on `[lo, hi]` for a function with `f(lo)` and `f(hi)` of
/// opposite sign (or zero). Stops when the bracket is narrower than
/// `x_tol`.
pub fn bisect<F>(mut f: F, mut lo: f64, mut hi: f64, x_tol: f64, max_iter: usize) -> Result<f64>
where
    F: FnMut(f64) -> f64,
{
    let mut f_lo = f(lo);
    let f_hi = f(hi);
    if f_lo == 0.0 {
        return Ok(lo);
    }
    if f_hi == 0.0 {
        return Ok(hi);
    }
    if f_lo.signum() == f_hi.signum() || f_lo.is_nan() || f_hi.is_nan() {
        return Err(Error::NoSolution("bisection bracket has no sign change"));
    }
    for _ in 0..max_iter {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= x_tol || mid == lo || mid == hi {
            return Ok(mid);
        }
        let f_mid = f(mid);
        if f_mid == 0.0 {
            return Ok(mid);
        }
        if f_mid.signum() == f_lo.signum() {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    Err(Error::NonConvergence {
        iterations: max_iter,
        residual: hi - lo,
    })
}
