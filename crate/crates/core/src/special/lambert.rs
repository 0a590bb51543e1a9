use std::f64::consts::E;

use super::Tolerances;
use crate::error::{Error, Result};

const BRANCH_POINT: f64 = -1.0 / E;

/// Principal branch W₀ of the Lambert function, w·e^w = x, for x ≥ −1/e.
pub fn lambert_w(x: f64) -> Result<f64> {
    lambert_w_with(x, &Tolerances::default())
}

pub fn lambert_w_with(x: f64, tol: &Tolerances) -> Result<f64> {
    if x.is_nan() {
        return Err(domain(x));
    }
    if x < BRANCH_POINT {
        // −1/e is not representable; accept a few ulps of rounding below it.
        if x >= BRANCH_POINT * (1.0 + 8.0 * f64::EPSILON) {
            return Ok(-1.0);
        }
        return Err(domain(x));
    }
    if x == 0.0 {
        return Ok(x);
    }
    if x == f64::INFINITY {
        return Ok(f64::INFINITY);
    }
    if x > E {
        return log_form(x, tol);
    }
    halley(x, initial_guess(x), tol)
}

fn domain(x: f64) -> Error {
    Error::Domain {
        routine: "lambert_w",
        value: x,
        expected: "x >= -1/e",
    }
}

fn initial_guess(x: f64) -> f64 {
    if x < -0.32 {
        // branch-point series in p = √(2(1 + e x))
        let p = (2.0 * (E * x).mul_add(1.0, 1.0)).max(0.0).sqrt();
        -1.0 + p - p * p / 3.0 + 11.0 / 72.0 * p * p * p
    } else if x < 0.0 {
        x * (1.0 - x * (1.0 - 1.5 * x))
    } else {
        let l = x.ln_1p();
        l * (1.0 - l.ln_1p() / (2.0 + l))
    }
}

fn halley(x: f64, mut w: f64, tol: &Tolerances) -> Result<f64> {
    let mut step = f64::INFINITY;
    for _ in 0..tol.max_iter {
        let ew = w.exp();
        let f = w * ew - x;
        // residual at rounding level; near the branch point w is only
        // determined to about √ε so the step test alone would stall
        if f.abs() <= 4.0 * f64::EPSILON * x.abs() {
            return Ok(w.max(-1.0));
        }
        let wp1 = w + 1.0;
        if wp1 == 0.0 {
            return Ok(w);
        }
        let denom = ew * wp1 - (w + 2.0) * f / (2.0 * wp1);
        step = f / denom;
        let next = w - step;
        // never step past the branch point
        w = if next < -1.0 { 0.5 * (w - 1.0) } else { next };
        if step.abs() <= tol.rel_tol * (1.0 + w.abs()) {
            return Ok(w.max(-1.0));
        }
    }
    Err(Error::NonConvergence {
        routine: "lambert_w",
        iterations: tol.max_iter,
        last_step: step,
    })
}

/// W(e^s), usable when e^s overflows.
pub fn lambert_w_of_exp(s: f64) -> Result<f64> {
    if s.is_nan() {
        return Err(domain(s));
    }
    if s <= 1.0 {
        return lambert_w(s.exp());
    }
    if s == f64::INFINITY {
        return Ok(f64::INFINITY);
    }
    log_form_ln(s, &Tolerances::default())
}

/// For x > e solve w + ln w = ln x with Newton; avoids overflow of w·e^w.
fn log_form(x: f64, tol: &Tolerances) -> Result<f64> {
    log_form_ln(x.ln(), tol)
}

fn log_form_ln(lx: f64, tol: &Tolerances) -> Result<f64> {
    let l2 = lx.ln();
    let mut w = lx - l2 + l2 / lx;
    let mut step = f64::INFINITY;
    for _ in 0..tol.max_iter {
        let f = w + w.ln() - lx;
        step = f / (1.0 + 1.0 / w);
        w -= step;
        if step.abs() <= tol.rel_tol * w {
            return Ok(w);
        }
    }
    Err(Error::NonConvergence {
        routine: "lambert_w",
        iterations: tol.max_iter,
        last_step: step,
    })
}
