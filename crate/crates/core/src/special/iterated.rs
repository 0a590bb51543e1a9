use super::roots::safeguarded_newton;
use super::{Bracket, Tolerances};
use crate::error::{Error, Result};

/// Solve x^q / (q ln x) = c for the root x > 1.
///
/// With y = x^q the equation is y / ln y = c, whose large root is the limit
/// of f₁ = c ln c, f_{k+1} = c ln f_k. The iteration runs on g = ln f and
/// needs c > e. The fixed point satisfies c ln c ≤ f ≤ 2 c ln c.
pub fn iterated_log_solve(c: f64, q: f64) -> Result<f64> {
    iterated_log_solve_with(c, q, &Tolerances::default())
}

pub fn iterated_log_solve_with(c: f64, q: f64, tol: &Tolerances) -> Result<f64> {
    if !(c > 0.0) {
        return Err(Error::Domain {
            routine: "iterated_log_solve",
            value: c,
            expected: "c > e",
        });
    }
    Ok((iterated_log_solve_ln_with(c.ln(), q, tol)?).exp())
}

/// Same root as [`iterated_log_solve`] but takes ln c and returns ln x, so
/// that c may be far outside the f64 range.
pub fn iterated_log_solve_ln(ln_c: f64, q: f64) -> Result<f64> {
    iterated_log_solve_ln_with(ln_c, q, &Tolerances::default())
}

fn iterated_log_solve_ln_with(ln_c: f64, q: f64, tol: &Tolerances) -> Result<f64> {
    if !(ln_c > 1.0) || !ln_c.is_finite() {
        return Err(Error::Domain {
            routine: "iterated_log_solve",
            value: ln_c.exp(),
            expected: "c > e",
        });
    }
    if !(q > 0.0) || !q.is_finite() {
        return Err(Error::Domain {
            routine: "iterated_log_solve",
            value: q,
            expected: "0 < q < inf",
        });
    }
    let lower = ln_c + ln_c.ln();
    let upper = std::f64::consts::LN_2 + lower;
    let mut g = ln_c;
    let mut converged = false;
    for _ in 0..60 {
        let next = ln_c + g.ln();
        let step = next - g;
        g = next;
        if step.abs() <= tol.rel_tol * g {
            converged = true;
            break;
        }
    }
    if !converged {
        // near c = e the contraction factor 1/g tends to one; finish with Newton
        let h = |g: f64| g - ln_c - g.ln();
        let dh = |g: f64| 1.0 - 1.0 / g;
        let lo = g.min(lower);
        g = safeguarded_newton(h, dh, Bracket::new(lo, upper.max(lo))?, g, tol)?;
    }
    let slack = 1e-12 * upper;
    if g < lower - slack || g > upper + slack {
        return Err(Error::BracketFailure {
            routine: "iterated_log_solve",
            lo: lower,
            hi: upper,
        });
    }
    Ok(g / q)
}
