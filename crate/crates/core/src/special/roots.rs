//! Bracketed scalar root finding.

use super::{Bracket, Tolerances};
use crate::error::{Error, Result};

/// Plain bisection for a continuous `f` with a sign change on `bracket`.
///
/// Stops when the bracket has shrunk to a few ulps or below `tol.rel_tol`
/// relative width.
pub fn bisect<F: Fn(f64) -> f64>(f: F, bracket: Bracket, tol: &Tolerances) -> Result<f64> {
    let (mut lo, mut hi) = (bracket.lo, bracket.hi);
    let mut flo = f(lo);
    let fhi = f(hi);
    if flo == 0.0 {
        return Ok(lo);
    }
    if fhi == 0.0 {
        return Ok(hi);
    }
    if flo.signum() == fhi.signum() || flo.is_nan() || fhi.is_nan() {
        return Err(Error::BracketFailure {
            routine: "bisect",
            lo,
            hi,
        });
    }
    // 2200 halvings exhaust any f64 interval.
    for _ in 0..2200 {
        let mid = lo + 0.5 * (hi - lo);
        if mid <= lo || mid >= hi || (hi - lo) <= tol.rel_tol * mid.abs() {
            return Ok(mid);
        }
        let fm = f(mid);
        if fm == 0.0 {
            return Ok(mid);
        }
        if fm.signum() == flo.signum() {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    Ok(lo + 0.5 * (hi - lo))
}

/// Newton's method kept inside a bracket; any step that leaves the bracket
/// or fails to shrink it fast enough is replaced by bisection.
pub fn safeguarded_newton<F, D>(f: F, df: D, bracket: Bracket, x0: f64, tol: &Tolerances) -> Result<f64>
where
    F: Fn(f64) -> f64,
    D: Fn(f64) -> f64,
{
    let (mut lo, mut hi) = (bracket.lo, bracket.hi);
    let flo = f(lo);
    let fhi = f(hi);
    if flo == 0.0 {
        return Ok(lo);
    }
    if fhi == 0.0 {
        return Ok(hi);
    }
    if flo.signum() == fhi.signum() || flo.is_nan() || fhi.is_nan() {
        return Err(Error::BracketFailure {
            routine: "safeguarded_newton",
            lo,
            hi,
        });
    }
    let rising = fhi > 0.0;
    let mut x = if bracket.contains(x0) { x0 } else { bracket.midpoint() };
    let mut last_step = f64::INFINITY;
    for _ in 0..tol.max_iter {
        let fx = f(x);
        if fx == 0.0 {
            return Ok(x);
        }
        if (fx > 0.0) == rising {
            hi = x;
        } else {
            lo = x;
        }
        let d = df(x);
        let mut next = x - fx / d;
        let newton_ok = d.is_finite() && d != 0.0 && next > lo && next < hi;
        if !newton_ok {
            next = lo + 0.5 * (hi - lo);
        }
        let step = next - x;
        x = next;
        if tol.converged(step, x) || hi - lo <= tol.rel_tol * x.abs() {
            return Ok(x);
        }
        last_step = step;
    }
    Err(Error::NonConvergence {
        routine: "safeguarded_newton",
        iterations: tol.max_iter,
        last_step,
    })
}
