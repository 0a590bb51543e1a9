//! Bounds on E∞(σ, B): the expected sup-norm of the average of n independent
//! mean-zero vectors in ℝᵖ with coordinate variance ≤ σ² and |Xᵢⱼ| ≤ B.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{adaptive_simpson, QuadOptions};
use crate::special::psi_inv;
use crate::special::psi::psi_raw;

/// Constant below (ln 2)²/(4√2) ≈ 0.08494 used on the lower side of the
/// integral sandwich.
pub const SANDWICH_LOWER_CONSTANT: f64 = 0.0849;

/// Explicit constant in the CaseA and A > B lower bounds.
pub const LOWER_CONSTANT: f64 = 1.0 / 3825.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundedInstance {
    pub n: u64,
    pub p: u64,
    pub sigma: f64,
    #[serde(rename = "B")]
    pub b: f64,
}

impl BoundedInstance {
    pub fn new(n: u64, p: u64, sigma: f64, b: f64) -> Result<Self> {
        let inst = BoundedInstance { n, p, sigma, b };
        inst.validate()?;
        Ok(inst)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.p == 0 {
            return Err(Error::InvalidInstance("n and p must be at least 1".into()));
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite() && self.b.is_finite()) {
            return Err(Error::InvalidInstance(format!("sigma must be positive and finite, got {}", self.sigma)));
        }
        if self.sigma > self.b {
            return Err(Error::InvalidInstance(format!("sigma must satisfy 0 < sigma <= B, got sigma={} B={}", self.sigma, self.b)));
        }
        Ok(())
    }

    pub fn nf(&self) -> f64 {
        self.n as f64
    }

    /// ln(2p)
    pub fn log_2p(&self) -> f64 {
        (2.0 * self.p as f64).ln()
    }

    fn var(&self) -> f64 {
        self.sigma * self.sigma
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regime {
    CaseA,
    CaseB,
    AGreaterThanB,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InfBoundResult {
    pub upper: f64,
    pub lower: f64,
    #[serde(rename = "A")]
    pub a: f64,
    pub correction: f64,
    pub regime: Regime,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TailForm {
    /// q^Benn(t), may exceed one
    Raw,
    /// p^Benn(t) = min(1, q^Benn(t))
    Clipped,
}

/// ln q^Benn(t) = ln(2p) − (nσ²/B²)Ψ(tB/σ²).
pub fn log_bennett_tail(t: f64, inst: &BoundedInstance) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(Error::Domain {
            routine: "bennett_tail",
            value: t,
            expected: "t >= 0",
        });
    }
    let v = inst.var();
    Ok(inst.log_2p() - inst.nf() * v / (inst.b * inst.b) * psi_raw(t * inst.b / v))
}

/// q^Benn(t) = 2p·exp(−(nσ²/B²)Ψ(tB/σ²)), or its clipped version.
pub fn bennett_tail(t: f64, inst: &BoundedInstance, form: TailForm) -> Result<f64> {
    let two_p = 2.0 * inst.p as f64;
    let q = two_p * (log_bennett_tail(t, inst)? - inst.log_2p()).exp();
    Ok(match form {
        TailForm::Raw => q,
        TailForm::Clipped => q.min(1.0),
    })
}

/// A = (σ²/B)·Ψ⁻¹(B² ln(2p)/(nσ²)), the level where q^Benn crosses one.
pub fn threshold_a(inst: &BoundedInstance) -> Result<f64> {
    inst.validate()?;
    let v = inst.var();
    Ok(v / inst.b * psi_inv(inst.b * inst.b * inst.log_2p() / (inst.nf() * v))?)
}

/// Bennett level where q^Benn equals 2^{−j}; j = 0 gives A.
fn dyadic_level(inst: &BoundedInstance, j: u32) -> Result<f64> {
    let v = inst.var();
    let arg = inst.b * inst.b * (inst.log_2p() + j as f64 * std::f64::consts::LN_2) / (inst.nf() * v);
    Ok(v / inst.b * psi_inv(arg)?)
}

/// f(t) = q^Benn(t)/ln(1 + tB/σ²).
pub fn f_benn(t: f64, inst: &BoundedInstance) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::Domain {
            routine: "f_benn",
            value: t,
            expected: "t > 0",
        });
    }
    let den = (t * inst.b / inst.var()).ln_1p();
    Ok((log_bennett_tail(t, inst)? - den.ln()).exp())
}

/// (B/n)(f(A∧B) − f(B)).
pub fn correction_term(inst: &BoundedInstance) -> Result<f64> {
    let a = threshold_a(inst)?;
    correction_from(inst, a)
}

fn correction_from(inst: &BoundedInstance, a: f64) -> Result<f64> {
    if a >= inst.b {
        return Ok(0.0);
    }
    let fa = if a > 0.0 { f_benn(a, inst)? } else { f64::INFINITY };
    let fb = f_benn(inst.b, inst)?;
    Ok(inst.b / inst.nf() * (fa - fb).max(0.0))
}

/// ∫₀^B p^Benn(t) dt.
///
/// The region [0, A∧B] contributes A∧B exactly. On [A, B] the integrand is
/// smooth; the interval is cut where q^Benn halves so each adaptive piece
/// sees a bounded dynamic range, and the remaining tail is dropped once the
/// bound (B/n)f(t) on it is negligible.
pub fn bennett_integral(inst: &BoundedInstance) -> Result<f64> {
    let a = threshold_a(inst)?;
    if a >= inst.b {
        return Ok(inst.b);
    }
    Ok(a + tail_integral(inst, a, 1e-12)?)
}

/// ∫_A^B q^Benn(t) dt for A < B at relative tolerance `rel_tol`.
pub fn tail_integral(inst: &BoundedInstance, a: f64, rel_tol: f64) -> Result<f64> {
    let opts = QuadOptions {
        rel_tol,
        ..QuadOptions::default()
    };
    let q = |t: f64| log_bennett_tail(t, inst).map(f64::exp).unwrap_or(f64::NAN);
    let mut total = 0.0;
    let mut left = a;
    for j in 1..4000u32 {
        let right = dyadic_level(inst, j)?.min(inst.b);
        if right > left {
            total += adaptive_simpson(q, left, right, &opts)?;
        }
        left = right;
        if left >= inst.b {
            break;
        }
        if inst.b / inst.nf() * f_benn(left, inst)? <= 1e-17 * total {
            break;
        }
    }
    Ok(total)
}

/// CaseA/CaseB split on nσ²/(σ²+B²) ≥ 1/(2p), ignoring A; ties go to CaseA.
pub fn variance_case(inst: &BoundedInstance) -> Regime {
    let v = inst.var();
    let lhs = inst.nf() * v / (v + inst.b * inst.b);
    if 2.0 * inst.p as f64 * lhs >= 1.0 {
        Regime::CaseA
    } else {
        Regime::CaseB
    }
}

pub fn regime(inst: &BoundedInstance) -> Result<Regime> {
    if threshold_a(inst)? > inst.b {
        return Ok(Regime::AGreaterThanB);
    }
    Ok(variance_case(inst))
}

/// Full bound record. upper = min(B, (A∧B) + (B/n)(f(A∧B) − f(B))).
pub fn e_inf_bounds(inst: &BoundedInstance) -> Result<InfBoundResult> {
    let a = threshold_a(inst)?;
    let correction = correction_from(inst, a)?;
    let upper = inst.b.min(a.min(inst.b) + correction);
    let regime = if a > inst.b { Regime::AGreaterThanB } else { variance_case(inst) };
    let lower = match regime {
        Regime::CaseA => LOWER_CONSTANT * upper,
        Regime::CaseB => 0.75 * inst.p as f64 * inst.var() / inst.b,
        Regime::AGreaterThanB => LOWER_CONSTANT * inst.b,
    };
    Ok(InfBoundResult {
        upper,
        lower,
        a,
        correction,
        regime,
    })
}

pub fn e_inf_upper(inst: &BoundedInstance) -> Result<f64> {
    Ok(e_inf_bounds(inst)?.upper)
}

pub fn e_inf_lower(inst: &BoundedInstance) -> Result<f64> {
    Ok(e_inf_bounds(inst)?.lower)
}
