use std::f64::consts::E;

use super::roots::safeguarded_newton;
use super::lambert::lambert_w_of_exp;
use super::{lambert_w_with, Bracket, Tolerances};
use crate::error::{Error, Result};

/// Ψ(x) = (1+x)ln(1+x) − x for x ≥ 0.
pub fn psi(x: f64) -> Result<f64> {
    if !(x >= 0.0) {
        return Err(Error::Domain {
            routine: "psi",
            value: x,
            expected: "x >= 0",
        });
    }
    Ok(psi_raw(x))
}

/// Ψ on x ≥ −1 without argument checks (NaN below −1).
///
/// Below |x| < 1e-2 the alternating series Σ_{k≥2} (−1)^k x^k / (k(k−1))
/// avoids the cancellation in the closed form.
pub(crate) fn psi_raw(x: f64) -> f64 {
    if x.is_nan() || x < -1.0 {
        return f64::NAN;
    }
    if x == -1.0 {
        return 1.0;
    }
    if x.abs() < 1e-2 {
        let mut term = x * x;
        let mut sum = 0.0;
        let mut sign = 1.0;
        for k in 2..14 {
            let kf = k as f64;
            sum += sign * term / (kf * (kf - 1.0));
            term *= x;
            sign = -sign;
        }
        return sum;
    }
    if x == f64::INFINITY {
        return f64::INFINITY;
    }
    (1.0 + x) * x.ln_1p() - x
}

/// Ψ′(x) = ln(1+x).
pub fn psi_prime(x: f64) -> f64 {
    x.ln_1p()
}

/// Ψ⁻¹(y) on y ≥ 0.
///
/// For y > 1: Ψ⁻¹(y) = (y−1)/W((y−1)/e) − 1. For y ≤ 1 a bracketed Newton
/// solve on √(2y)/2 ≤ Ψ⁻¹(y) ≤ 2√(2y).
pub fn psi_inv(y: f64) -> Result<f64> {
    psi_inv_with(y, &Tolerances::default())
}

pub fn psi_inv_with(y: f64, tol: &Tolerances) -> Result<f64> {
    if y.is_nan() || y < 0.0 {
        return Err(Error::Domain {
            routine: "psi_inv",
            value: y,
            expected: "y >= 0",
        });
    }
    if y == 0.0 {
        return Ok(0.0);
    }
    if y == f64::INFINITY {
        return Ok(f64::INFINITY);
    }
    if y > 1.0 {
        return closed_form(y, tol);
    }
    let root = small_branch(y, tol)?;
    if y == 1.0 {
        // the closed form has a removable singularity here with limit e − 1
        let limit = E - 1.0;
        if (root - limit).abs() > tol.abs_tol {
            return Err(Error::BranchMismatch {
                routine: "psi_inv",
                left: root,
                right: limit,
            });
        }
        return Ok(0.5 * (root + limit));
    }
    Ok(root)
}

fn closed_form(y: f64, tol: &Tolerances) -> Result<f64> {
    let z = (y - 1.0) / E;
    let w = lambert_w_with(z, tol)?;
    Ok((y - 1.0) / w - 1.0)
}

fn small_branch(y: f64, tol: &Tolerances) -> Result<f64> {
    let s = (2.0 * y).sqrt();
    let bracket = Bracket::new(0.5 * s, 2.0 * s)?;
    // two-term expansion Ψ⁻¹(y) ≈ s + s²/3 is a good start for small y
    let x0 = s * (1.0 + s / 3.0);
    safeguarded_newton(|x| psi_raw(x) - y, psi_prime, bracket, x0, tol)
}

/// ln Ψ⁻¹(e^s), for arguments whose exponential leaves the f64 range.
///
/// Uses Ψ⁻¹(y) = (y−1)/W((y−1)/e) − 1 ≈ y / W(y/e) once y > e^{600}.
pub fn ln_psi_inv_of_exp(s: f64) -> Result<f64> {
    if s.is_nan() {
        return Err(Error::Domain {
            routine: "ln_psi_inv_of_exp",
            value: s,
            expected: "not NaN",
        });
    }
    if s < 600.0 {
        return Ok(psi_inv(s.exp())?.ln());
    }
    if s == f64::INFINITY {
        return Ok(f64::INFINITY);
    }
    Ok(s - lambert_w_of_exp(s - 1.0)?.ln())
}

/// Ψ′(Ψ⁻¹(y)) = ln(1 + Ψ⁻¹(y)); for y > 1 this is 1 + W((y−1)/e).
pub fn psi_prime_at_inv(y: f64) -> Result<f64> {
    if y > 1.0 && y.is_finite() {
        return Ok(1.0 + lambert_w_with((y - 1.0) / E, &Tolerances::default())?);
    }
    Ok(psi_inv(y)?.ln_1p())
}
