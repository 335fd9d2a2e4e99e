//! Bracketing root finder.

use crate::error::{Error, Result};

pub const DEFAULT_TOL: f64 = 1e-12;
const MAX_ITERATIONS: usize = 400;

/// Finds a root of `f` on the bracket `[a, b]` (either order) by bisection.
///
/// Stops when the bracket is narrower than `tol` or `f` hits zero exactly.
/// `f(a)` and `f(b)` must not share a strict sign.
pub fn bisect<F>(f: F, a: f64, b: f64, tol: f64) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    let (mut lo, mut hi) = (a, b);
    let mut f_lo = f(lo);
    let f_hi = f(hi);
    if f_lo == 0.0 {
        return Ok(lo);
    }
    if f_hi == 0.0 {
        return Ok(hi);
    }
    if f_lo.signum() == f_hi.signum() || f_lo.is_nan() || f_hi.is_nan() {
        return Err(Error::NotBracketed { lo: a, hi: b });
    }

    for _ in 0..MAX_ITERATIONS {
        if (hi - lo).abs() <= tol {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
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
    Ok(0.5 * (lo + hi))
}

/// Solves `g(x) = target` for nondecreasing `g` on `[lo, hi]`.
pub fn solve_increasing<F>(g: F, target: f64, lo: f64, hi: f64, tol: f64) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    bisect(|x| g(x) - target, lo, hi, tol)
}
