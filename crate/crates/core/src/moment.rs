//! Finite-q bounds: X has coordinate variance ≤ σ² and (E‖X‖∞^q)^{1/q} ≤ B.
//!
//! Notation used throughout: L = ln(2p)/n and κ = (B²/σ²)^{q/(q−2)}·L.

use std::f64::consts::{E, SQRT_2};
use std::fmt;

use serde::de::{self, Deserializer, Visitor};
use serde::{Deserialize, Serialize, Serializer};

use crate::bounded::{e_inf_upper, BoundedInstance};
use crate::error::{Error, Result};
use crate::special::{iterated_log_solve_ln, lambert_w_of_exp, ln_psi_inv_of_exp, psi_inv};

/// Moment order q ∈ [2, ∞].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MomentOrder {
    Finite(f64),
    Infinite,
}

impl MomentOrder {
    pub fn parse(s: &str) -> Result<Self> {
        let t = s.trim();
        if matches!(t.to_ascii_lowercase().as_str(), "inf" | "infinity" | "+inf") {
            return Ok(MomentOrder::Infinite);
        }
        let q: f64 = t
            .parse()
            .map_err(|_| Error::InvalidInstance(format!("cannot parse q from '{s}'")))?;
        if q == f64::INFINITY {
            return Ok(MomentOrder::Infinite);
        }
        if !(q >= 2.0) {
            return Err(Error::InvalidInstance("q must be ≥ 2".into()));
        }
        Ok(MomentOrder::Finite(q))
    }

    pub fn value(&self) -> f64 {
        match self {
            MomentOrder::Finite(q) => *q,
            MomentOrder::Infinite => f64::INFINITY,
        }
    }
}

impl fmt::Display for MomentOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MomentOrder::Finite(q) => write!(f, "{q}"),
            MomentOrder::Infinite => write!(f, "inf"),
        }
    }
}

impl Serialize for MomentOrder {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            MomentOrder::Finite(q) => s.serialize_f64(*q),
            MomentOrder::Infinite => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for MomentOrder {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        struct V;
        impl Visitor<'_> for V {
            type Value = MomentOrder;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a number >= 2 or \"inf\"")
            }
            fn visit_f64<E: de::Error>(self, v: f64) -> std::result::Result<MomentOrder, E> {
                MomentOrder::parse(&v.to_string()).map_err(E::custom)
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> std::result::Result<MomentOrder, E> {
                self.visit_f64(v as f64)
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> std::result::Result<MomentOrder, E> {
                self.visit_f64(v as f64)
            }
            fn visit_str<E: de::Error>(self, v: &str) -> std::result::Result<MomentOrder, E> {
                MomentOrder::parse(v).map_err(E::custom)
            }
        }
        d.deserialize_any(V)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentInstance {
    pub n: u64,
    pub p: u64,
    pub sigma: f64,
    #[serde(rename = "B")]
    pub b: f64,
    pub q: MomentOrder,
}

impl MomentInstance {
    pub fn new(n: u64, p: u64, sigma: f64, b: f64, q: MomentOrder) -> Result<Self> {
        let inst = MomentInstance { n, p, sigma, b, q };
        inst.validate()?;
        Ok(inst)
    }

    pub fn finite(n: u64, p: u64, sigma: f64, b: f64, q: f64) -> Result<Self> {
        Self::new(n, p, sigma, b, MomentOrder::Finite(q))
    }

    pub fn validate(&self) -> Result<()> {
        if let MomentOrder::Finite(q) = self.q {
            if !(q >= 2.0) || q.is_nan() {
                return Err(Error::InvalidInstance("q must be ≥ 2".into()));
            }
        }
        self.bounded().validate()
    }

    /// The same (n, p, σ, B) read as a bounded-envelope instance.
    pub fn bounded(&self) -> BoundedInstance {
        BoundedInstance {
            n: self.n,
            p: self.p,
            sigma: self.sigma,
            b: self.b,
        }
    }

    pub fn with_q(&self, q: f64) -> Self {
        MomentInstance {
            q: if q == f64::INFINITY { MomentOrder::Infinite } else { MomentOrder::Finite(q) },
            ..*self
        }
    }

    /// L = ln(2p)/n
    pub fn l(&self) -> f64 {
        (2.0 * self.p as f64).ln() / self.n as f64
    }

    fn q_finite(&self, routine: &'static str) -> Result<f64> {
        match self.q {
            MomentOrder::Finite(q) => Ok(q),
            MomentOrder::Infinite => Err(Error::Domain {
                routine,
                value: f64::INFINITY,
                expected: "finite q",
            }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailQuery {
    pub z: f64,
    pub k: f64,
}

impl TailQuery {
    pub fn new(z: f64, k: f64) -> Result<Self> {
        if !(z > 1.0) {
            return Err(Error::Domain {
                routine: "TailQuery",
                value: z,
                expected: "z > 1",
            });
        }
        if !(k > 0.0) || !k.is_finite() {
            return Err(Error::Domain {
                routine: "TailQuery",
                value: k,
                expected: "0 < K < inf",
            });
        }
        Ok(TailQuery { z, k })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum QCase {
    Case1,
    Case2,
}

/// ln κ with κ = (B²/σ²)^{q/(q−2)}·L; at q = 2 the power is read as +∞
/// when B > σ and as 1 when B = σ.
pub fn ln_case_parameter(inst: &MomentInstance) -> Result<f64> {
    let q = inst.q_finite("case_parameter")?;
    let ratio = 2.0 * (inst.b / inst.sigma).ln();
    let lead = if q == 2.0 {
        if ratio > 0.0 {
            f64::INFINITY
        } else {
            0.0
        }
    } else {
        q / (q - 2.0) * ratio
    };
    Ok(lead + inst.l().ln())
}

/// Case 1 when κ ≤ e, case 2 otherwise.
pub fn moment_case(inst: &MomentInstance) -> Result<QCase> {
    Ok(if ln_case_parameter(inst)? <= 1.0 { QCase::Case1 } else { QCase::Case2 })
}

fn check_query(query: &TailQuery, inst: &MomentInstance, routine: &'static str) -> Result<f64> {
    inst.validate()?;
    let q = inst.q_finite(routine)?;
    TailQuery::new(query.z, query.k)?;
    if query.k < inst.b {
        return Err(Error::Domain {
            routine,
            value: query.k,
            expected: "K >= B",
        });
    }
    Ok(q)
}

/// Bennett threshold (σ²/K)Ψ⁻¹(K² ln z/(nσ²)), used for q = 2.
fn bennett_threshold(query: &TailQuery, inst: &MomentInstance) -> Result<f64> {
    let v = inst.sigma * inst.sigma;
    Ok(v / query.k * psi_inv(query.k * query.k * query.z.ln() / (inst.n as f64 * v))?)
}

/// B(σ²/B²)^{(q−1)/(q−2)}·Ψ⁻¹[(B²/σ²)^{q/(q−2)} ln z/n], in logs.
fn fn_first_term(query: &TailQuery, inst: &MomentInstance, q: f64) -> Result<f64> {
    let ln_r = 2.0 * (inst.sigma / inst.b).ln();
    let ln_lz = (query.z.ln() / inst.n as f64).ln();
    let arg = -q / (q - 2.0) * ln_r + ln_lz;
    let lp = ln_psi_inv_of_exp(arg)?;
    Ok((inst.b.ln() + (q - 1.0) / (q - 2.0) * ln_r + lp).exp())
}

/// Tail threshold t with P((1/n)ΣXᵢ ≥ t) ≤ 1/z for i.i.d. mean-zero X with
/// variance σ² and E|X|^q ≤ B^q:
///
/// t = B(σ²/B²)^{(q−1)/(q−2)}Ψ⁻¹[(B²/σ²)^{q/(q−2)} ln z/n]
///   + (B^q/K^{q−1})Ψ⁻¹[(K/B)^q ln z/n].
///
/// At q = 2 this returns the Bennett threshold at level K.
pub fn fuk_nagaev_threshold_v1(query: &TailQuery, inst: &MomentInstance) -> Result<f64> {
    let q = check_query(query, inst, "fuk_nagaev_threshold_v1")?;
    if q == 2.0 {
        return bennett_threshold(query, inst);
    }
    let first = fn_first_term(query, inst, q)?;
    let ln_kb = (query.k / inst.b).ln();
    let ln_lz = (query.z.ln() / inst.n as f64).ln();
    let second = (inst.b.ln() - (q - 1.0) * ln_kb + ln_psi_inv_of_exp(q * ln_kb + ln_lz)?).exp();
    Ok(first + second)
}

/// R = (1 − (B^q/(σ²K^{q−2}))^{1/(q−2)})₊
pub fn r_factor(query: &TailQuery, inst: &MomentInstance) -> Result<f64> {
    let q = inst.q_finite("r_factor")?;
    let ln_ratio = q * inst.b.ln() - 2.0 * inst.sigma.ln() - (q - 2.0) * query.k.ln();
    if ln_ratio >= 0.0 {
        return Ok(0.0);
    }
    Ok(-(ln_ratio / (q - 2.0)).exp_m1())
}

/// Variant of [`fuk_nagaev_threshold_v1`] whose second term is
/// (2K ln z)/(nq)·1/W((K/B)^{q/m}(ln z)^{1/m}/(10(nR)^{1/m})) with
/// m = ⌊q⌋ + 1; the term is zero when R = 0.
pub fn fuk_nagaev_threshold_v2(query: &TailQuery, inst: &MomentInstance) -> Result<f64> {
    let q = check_query(query, inst, "fuk_nagaev_threshold_v2")?;
    if q == 2.0 {
        return bennett_threshold(query, inst);
    }
    let first = fn_first_term(query, inst, q)?;
    Ok(first + v2_second_term(query, inst, q)?)
}

fn v2_second_term(query: &TailQuery, inst: &MomentInstance, q: f64) -> Result<f64> {
    let r = r_factor(query, inst)?;
    if r == 0.0 {
        return Ok(0.0);
    }
    let n = inst.n as f64;
    let m = q.floor() + 1.0;
    let ln_z = query.z.ln();
    let ln_arg = q / m * (query.k / inst.b).ln() + ln_z.ln() / m - 10f64.ln() - (n * r).ln() / m;
    let w = lambert_w_of_exp(ln_arg)?;
    Ok(2.0 * query.k * ln_z / (n * q) / w)
}

/// min(B, U): U = 10σ√L in case 1 and 5B(B²/σ²)^{1/(q−2)}L/ln(1+κ) in case 2.
pub fn u_bound(inst: &MomentInstance) -> Result<f64> {
    inst.validate()?;
    let q = inst.q_finite("u_bound")?;
    let l = inst.l();
    let ln_kappa = ln_case_parameter(inst)?;
    let u = if ln_kappa <= 1.0 {
        10.0 * inst.sigma * l.sqrt()
    } else if q == 2.0 {
        f64::INFINITY
    } else {
        let ln_ratio = 2.0 * (inst.b / inst.sigma).ln();
        let ln_1p_kappa = if ln_kappa > 30.0 { ln_kappa } else { ln_kappa.exp().ln_1p() };
        (5f64.ln() + inst.b.ln() + ln_ratio / (q - 2.0) + l.ln() - ln_1p_kappa.ln()).exp()
    };
    Ok(inst.b.min(u))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TruncationBranch {
    FixedPoint,
    Fallback,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Truncation {
    pub k: f64,
    pub branch: TruncationBranch,
    /// ln D with D = (q−1)n(Bs)^q/((e ln 2p + √2)q²), s = √(ln 2p/(nσ²))
    pub ln_d: f64,
}

fn require_case2(inst: &MomentInstance, routine: &'static str) -> Result<f64> {
    inst.validate()?;
    let q = inst.q_finite(routine)?;
    let lk = ln_case_parameter(inst)?;
    if lk <= 1.0 {
        return Err(Error::Domain {
            routine,
            value: lk.exp(),
            expected: "case-2 instance (kappa > e)",
        });
    }
    Ok(q)
}

/// Truncation level balancing the two error terms of the poly-log bound.
///
/// With s = √(ln 2p/(nσ²)) the level solves (Ks)^q/(q ln(Ks)) = D, giving
/// Ks = [D ln D ln D …]^{1/q}, when (D ln D)^{1/q} ≥ e. Otherwise
/// K = 2B L^{−1/q}[ln((B/σ)L^{1/2−1/q})]^{1/q}.
pub fn optimal_truncation(inst: &MomentInstance) -> Result<Truncation> {
    let q = require_case2(inst, "optimal_truncation_K")?;
    let ln2p = (2.0 * inst.p as f64).ln();
    let n = inst.n as f64;
    let l = inst.l();
    let ln_s = 0.5 * (l.ln() - 2.0 * inst.sigma.ln());
    let ln_d = (q - 1.0).ln() + n.ln() + q * (inst.b.ln() + ln_s) - (E * ln2p + SQRT_2).ln() - 2.0 * q.ln();
    if ln_d > 1.0 && ln_d + ln_d.ln() >= q {
        let ln_x = iterated_log_solve_ln(ln_d, q)?;
        return Ok(Truncation {
            k: (ln_x - ln_s).exp(),
            branch: TruncationBranch::FixedPoint,
            ln_d,
        });
    }
    let inner = (inst.b / inst.sigma).ln() + (0.5 - 1.0 / q) * l.ln();
    let k = 2.0 * inst.b * (-l.ln() / q).exp() * inner.powf(1.0 / q);
    Ok(Truncation {
        k,
        branch: TruncationBranch::Fallback,
        ln_d,
    })
}

pub fn optimal_truncation_k(inst: &MomentInstance) -> Result<f64> {
    Ok(optimal_truncation(inst)?.k)
}

/// B L^{1−1/q}[ln((B²/σ²)L^{1−2/q})]^{1/q−1}, valid up to a universal
/// constant on case-2 instances.
pub fn lq_bennett_upper(inst: &MomentInstance) -> Result<f64> {
    let q = require_case2(inst, "lq_bennett_upper")?;
    let l = inst.l();
    let inner = 2.0 * (inst.b / inst.sigma).ln() + (1.0 - 2.0 / q) * l.ln();
    if inner <= 0.0 {
        return Err(Error::Domain {
            routine: "lq_bennett_upper",
            value: inner.exp(),
            expected: "logarithm argument > 1",
        });
    }
    Ok((inst.b.ln() + (1.0 - 1.0 / q) * l.ln() + (1.0 / q - 1.0) * inner.ln()).exp())
}

/// q → ∞ form of [`lq_bennett_upper`]: B·L/ln(B²L/σ²).
pub fn limit_expression(inst: &MomentInstance) -> Result<f64> {
    inst.validate()?;
    let l = inst.l();
    let arg = inst.b * inst.b * l / (inst.sigma * inst.sigma);
    if arg <= 1.0 {
        return Err(Error::Domain {
            routine: "limit_expression",
            value: arg,
            expected: "B^2 L / sigma^2 > 1",
        });
    }
    Ok(inst.b * l / arg.ln())
}

/// σ√L + B·L^{1−1/q}, the earlier bound used for comparison.
pub fn literature_baseline(inst: &MomentInstance) -> Result<f64> {
    inst.validate()?;
    let q = inst.q_finite("literature_baseline")?;
    let l = inst.l();
    Ok(inst.sigma * l.sqrt() + inst.b * l.powf(1.0 - 1.0 / q))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UStar {
    pub value: f64,
    pub case: Option<QCase>,
    /// the bound holds up to an unspecified universal constant
    pub modulo_constant: bool,
    /// q = 2 exactly, where the case rule uses the limiting convention
    pub q2_boundary: bool,
}

/// min(B, U*): σ√L in case 1, [`lq_bennett_upper`] in case 2, and the
/// bounded-envelope upper bound for q = ∞.
pub fn u_star(inst: &MomentInstance) -> Result<f64> {
    Ok(u_star_detail(inst)?.value)
}

pub fn u_star_detail(inst: &MomentInstance) -> Result<UStar> {
    inst.validate()?;
    let q = match inst.q {
        MomentOrder::Infinite => {
            return Ok(UStar {
                value: e_inf_upper(&inst.bounded())?,
                case: None,
                modulo_constant: false,
                q2_boundary: false,
            })
        }
        MomentOrder::Finite(q) => q,
    };
    let case = moment_case(inst)?;
    let raw = match case {
        QCase::Case1 => inst.sigma * inst.l().sqrt(),
        QCase::Case2 => lq_bennett_upper(inst)?,
    };
    Ok(UStar {
        value: inst.b.min(raw),
        case: Some(case),
        modulo_constant: true,
        q2_boundary: q == 2.0,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QRatio {
    pub q: f64,
    pub q_next: f64,
    pub ratio: f64,
    pub ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonotonicityReport {
    pub values: Vec<(f64, f64)>,
    pub ratios: Vec<QRatio>,
    pub max_ratio: f64,
    /// bounded-envelope upper bound, the q = ∞ member of the family
    pub inf_value: f64,
    /// B·L/ln(B²L/σ²) when defined
    pub limit: Option<f64>,
    pub all_ok: bool,
}

/// Largest admissible ratio U*(q′)/U*(q) for q < q′.
pub const MONOTONICITY_FACTOR: f64 = 4.0;

/// Evaluates U* along `q_grid` and checks U*(q′) ≤ 4·U*(q) for adjacent
/// q < q′. Requires L ≤ 1.
pub fn monotonicity_audit(base: &MomentInstance, q_grid: &[f64]) -> Result<MonotonicityReport> {
    base.validate()?;
    if base.l() > 1.0 {
        return Err(Error::InvalidInstance(format!("monotonicity audit needs ln(2p)/n <= 1, got {}", base.l())));
    }
    let mut values = Vec::with_capacity(q_grid.len());
    for &q in q_grid {
        if !(q >= 2.0) || !q.is_finite() {
            return Err(Error::InvalidInstance(format!("grid value {q} is not a finite q >= 2")));
        }
        values.push((q, u_star(&base.with_q(q))?));
    }
    let mut ratios = Vec::new();
    for w in values.windows(2) {
        let (q, u) = w[0];
        let (q_next, u_next) = w[1];
        let ratio = u_next / u;
        ratios.push(QRatio {
            q,
            q_next,
            ratio,
            ok: q > q_next || ratio <= MONOTONICITY_FACTOR,
        });
    }
    let max_ratio = ratios.iter().map(|r| r.ratio).fold(f64::NEG_INFINITY, f64::max);
    let all_ok = ratios.iter().all(|r| r.ok);
    Ok(MonotonicityReport {
        values,
        ratios,
        max_ratio,
        inf_value: e_inf_upper(&base.bounded())?,
        limit: limit_expression(base).ok(),
        all_ok,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn psi_oracle(x: f64) -> f64 {
        (1.0 + x) * (1.0 + x).ln() - x
    }

    fn bisect_increasing<F: Fn(f64) -> f64>(f: F, y: f64) -> f64 {
        let (mut lo, mut hi) = (0.0, 1.0);
        while f(hi) < y {
            hi *= 2.0;
        }
        for _ in 0..300 {
            let m = 0.5 * (lo + hi);
            if f(m) < y {
                lo = m
            } else {
                hi = m
            }
        }
        0.5 * (lo + hi)
    }

    fn psi_inv_oracle(y: f64) -> f64 {
        bisect_increasing(psi_oracle, y)
    }

    fn w_oracle(x: f64) -> f64 {
        bisect_increasing(|w| w * w.exp(), x)
    }

    fn mi(n: u64, p: u64, s: f64, b: f64, q: f64) -> MomentInstance {
        MomentInstance::finite(n, p, s, b, q).unwrap()
    }

    fn close(a: f64, b: f64, rel: f64) -> bool {
        (a - b).abs() <= rel * b.abs().max(a.abs())
    }

    #[test]
    fn parse_order() {
        assert_eq!(MomentOrder::parse("inf").unwrap(), MomentOrder::Infinite);
        assert_eq!(MomentOrder::parse("3.5").unwrap(), MomentOrder::Finite(3.5));
        let e = MomentOrder::parse("1.5").unwrap_err();
        assert!(e.to_string().contains("q must be ≥ 2"));
        assert!(MomentOrder::parse("abc").is_err());
        let j = serde_json::to_string(&mi(3, 4, 0.5, 1.0, 4.0)).unwrap();
        assert_eq!(serde_json::from_str::<MomentInstance>(&j).unwrap(), mi(3, 4, 0.5, 1.0, 4.0));
        let inf = MomentInstance::new(3, 4, 0.5, 1.0, MomentOrder::Infinite).unwrap();
        let j = serde_json::to_string(&inf).unwrap();
        assert!(j.contains("\"inf\""));
        assert_eq!(serde_json::from_str::<MomentInstance>(&j).unwrap(), inf);
    }

    #[test]
    fn v1_vanishes_as_z_to_one() {
        let inst = mi(100, 1, 1.0, 2.0, 4.0);
        let t = fuk_nagaev_threshold_v1(&TailQuery::new(1.0 + 1e-12, 4.0).unwrap(), &inst).unwrap();
        assert!(t < 1e-5);
        let t2 = fuk_nagaev_threshold_v2(&TailQuery::new(1.0 + 1e-12, 4.0).unwrap(), &inst).unwrap();
        assert!(t2 < 1e-3);
    }

    #[test]
    fn v1_bennett_form() {
        // B^q = σ²K^{q−2}
        let (sigma, k, q, n, z) = (0.7, 3.0, 5.0, 40u64, 20.0);
        let b = (sigma * sigma * f64::powf(k, q - 2.0)).powf(1.0 / q);
        let inst = mi(n, 1, sigma, b, q);
        let t = fuk_nagaev_threshold_v1(&TailQuery::new(z, k).unwrap(), &inst).unwrap();
        let v = sigma * sigma;
        let expected = 2.0 * v / k * psi_inv_oracle(k * k * f64::ln(z) / (n as f64 * v));
        assert!(close(t, expected, 1e-10), "{t} vs {expected}");
    }

    #[test]
    fn v1_example_value() {
        let (n, sigma, b, q, k, z) = (100.0, 1.0, 2.0, 4.0, 4.0, 10.0f64);
        let inst = mi(100, 1, sigma, b, q);
        let t = fuk_nagaev_threshold_v1(&TailQuery::new(z, k).unwrap(), &inst).unwrap();
        let r = sigma * sigma / (b * b);
        let first = b * r.powf((q - 1.0) / (q - 2.0)) * psi_inv_oracle((1.0 / r).powf(q / (q - 2.0)) * z.ln() / n);
        let second = b.powf(q) / k.powf(q - 1.0) * psi_inv_oracle((k / b).powf(q) * z.ln() / n);
        assert!(close(t, first + second, 1e-12));
    }

    #[test]
    fn query_validation() {
        let inst = mi(100, 1, 1.0, 2.0, 4.0);
        assert!(TailQuery::new(1.0, 4.0).is_err());
        let q = TailQuery { z: 10.0, k: 1.0 };
        assert!(fuk_nagaev_threshold_v1(&q, &inst).is_err());
        assert!(fuk_nagaev_threshold_v2(&q, &inst).is_err());
    }

    #[test]
    fn v2_r_zero_drops_second_term() {
        let inst = mi(50, 1, 0.5, 2.0, 3.0);
        let query = TailQuery::new(10.0, 2.5).unwrap();
        assert_eq!(r_factor(&query, &inst).unwrap(), 0.0);
        let v2 = fuk_nagaev_threshold_v2(&query, &inst).unwrap();
        assert_eq!(v2, fn_first_term(&query, &inst, 3.0).unwrap());
    }

    #[test]
    fn v2_example_value() {
        let (n, sigma, b, q, k, z) = (100.0, 1.0, 1.1, 3.0, 10.0, 10.0f64);
        let inst = mi(100, 1, sigma, b, q);
        let query = TailQuery::new(z, k).unwrap();
        let r = r_factor(&query, &inst).unwrap();
        let r_expected = 1.0 - (b.powf(q) / (sigma * sigma * k.powf(q - 2.0))).powf(1.0 / (q - 2.0));
        assert!(r > 0.0 && r < 1.0 && close(r, r_expected, 1e-14));
        let m = 4.0;
        let arg = (k / b).powf(q / m) * z.ln().powf(1.0 / m) / (10.0 * (n * r).powf(1.0 / m));
        let ratio = sigma * sigma / (b * b);
        let first = b * ratio.powf((q - 1.0) / (q - 2.0)) * psi_inv_oracle((1.0 / ratio).powf(q / (q - 2.0)) * z.ln() / n);
        let expected = first + 2.0 * k * z.ln() / (n * q) / w_oracle(arg);
        let got = fuk_nagaev_threshold_v2(&query, &inst).unwrap();
        assert!(got.is_finite() && close(got, expected, 1e-12));
    }

    #[test]
    fn thresholds_monotone_in_z_and_n() {
        let k = 6.0;
        for &(s, b, q) in &[(1.0, 1.5, 3.0), (0.2, 1.0, 4.5), (1.0, 1.0, 8.0)] {
            for f in [fuk_nagaev_threshold_v1, fuk_nagaev_threshold_v2] {
                let mut prev = 0.0;
                for z in [1.5, 2.0, 10.0, 100.0, 1e4] {
                    let t = f(&TailQuery::new(z, k).unwrap(), &mi(100, 1, s, b, q)).unwrap();
                    assert!(t >= prev);
                    prev = t;
                }
                let mut prev = f64::INFINITY;
                for n in [1u64, 10, 100, 1000, 100_000] {
                    let t = f(&TailQuery::new(10.0, k).unwrap(), &mi(n, 1, s, b, q)).unwrap();
                    assert!(t <= prev);
                    prev = t;
                }
            }
        }
    }

    #[test]
    fn v2_second_term_vanishes_in_q() {
        let query = TailQuery::new(10.0, 5.0).unwrap();
        let mut prev = f64::INFINITY;
        for q in [3.0, 8.0, 32.0, 128.0, 512.0, 2048.0] {
            let t = v2_second_term(&query, &mi(100, 1, 0.5, 1.0, q), q).unwrap();
            assert!(t < prev);
            prev = t;
        }
        assert!(prev < 1e-3);
    }

    #[test]
    fn q_two_uses_bennett_threshold() {
        let inst = mi(30, 1, 0.5, 1.0, 2.0);
        let query = TailQuery::new(10.0, 2.0).unwrap();
        let expected = 0.25 / 2.0 * psi_inv_oracle(4.0 * 10f64.ln() / (30.0 * 0.25));
        assert!(close(fuk_nagaev_threshold_v1(&query, &inst).unwrap(), expected, 1e-12));
        assert!(close(fuk_nagaev_threshold_v2(&query, &inst).unwrap(), expected, 1e-12));
    }

    #[test]
    fn u_bound_examples() {
        let inst = mi(100, 10, 1.0, 1.0, 4.0);
        assert!(close(ln_case_parameter(&inst).unwrap().exp(), 20f64.ln() / 100.0, 1e-12));
        assert_eq!(moment_case(&inst).unwrap(), QCase::Case1);
        assert_eq!(u_bound(&inst).unwrap(), 1.0);
        let i2 = mi(10_000, 10, 0.01, 0.01, 4.0);
        assert!(close(u_bound(&i2).unwrap(), 10.0 * 0.01 * (20f64.ln() / 1e4).sqrt(), 1e-14));

        let inst = mi(10, 1000, 0.01, 1.0, 3.0);
        assert_eq!(moment_case(&inst).unwrap(), QCase::Case2);
        let l = 2000f64.ln() / 10.0;
        let ratio = 1e4f64;
        let kappa = ratio.powf(3.0) * l;
        let expected = 5.0 * ratio * l / (1.0 + kappa).ln();
        assert_eq!(u_bound(&inst).unwrap(), expected.min(1.0));
        let inst = mi(100_000, 1000, 0.01, 1.0, 3.0);
        let l = 2000f64.ln() / 1e5;
        let kappa = ratio.powf(3.0) * l;
        assert!(close(u_bound(&inst).unwrap(), 5.0 * ratio * l / (1.0 + kappa).ln(), 1e-12));
    }

    #[test]
    fn q_two_case_rule() {
        assert_eq!(moment_case(&mi(100, 10, 0.5, 1.0, 2.0)).unwrap(), QCase::Case2);
        assert_eq!(moment_case(&mi(100, 10, 1.0, 1.0, 2.0)).unwrap(), QCase::Case1);
        assert_eq!(u_bound(&mi(100, 10, 0.5, 1.0, 2.0)).unwrap(), 1.0);
        assert!(u_star_detail(&mi(100, 10, 0.5, 1.0, 2.0)).unwrap().q2_boundary);
    }

    #[test]
    fn truncation_fixed_point_residual() {
        for &(n, p, s, b, q) in &[(1000u64, 100u64, 0.01, 1.0, 3.0), (100, 10, 0.05, 1.0, 4.0), (10_000, 1000, 0.001, 1.0, 8.0), (100, 10, 0.05, 1.0, 4096.0)] {
            let inst = mi(n, p, s, b, q);
            let t = optimal_truncation(&inst).unwrap();
            assert_eq!(t.branch, TruncationBranch::FixedPoint, "{inst:?}");
            let ln2p = (2.0 * p as f64).ln();
            let sc = (ln2p / (n as f64 * s * s)).sqrt();
            let x = t.k * sc;
            // q ln x − ln(q ln x) = ln D
            let lhs = q * x.ln() - (q * x.ln()).ln();
            assert!((lhs - t.ln_d).abs() <= 1e-8 * t.ln_d.abs(), "{inst:?}");
            // 1/ln(Ks) = n(q−1)B^q / ((e ln 2p + √2) q K^q), in logs
            let rhs = (n as f64).ln() + (q - 1.0).ln() + q * b.ln() - (E * ln2p + SQRT_2).ln() - q.ln() - q * t.k.ln();
            assert!((-(x.ln().ln()) - rhs).abs() <= 1e-8 * (1.0 + rhs.abs()));
            // (D ln D)^{1/q} ≤ Ks ≤ (2D ln D)^{1/q}
            let lo = (t.ln_d + t.ln_d.ln()) / q;
            assert!(x.ln() >= lo - 1e-12 && x.ln() <= lo + std::f64::consts::LN_2 / q + 1e-12);
        }
    }

    #[test]
    fn truncation_fallback_closed_form() {
        let inst = mi(2, 1, 0.3, 1.0, 64.0);
        assert_eq!(moment_case(&inst).unwrap(), QCase::Case2);
        let t = optimal_truncation(&inst).unwrap();
        assert_eq!(t.branch, TruncationBranch::Fallback);
        let (q, l) = (64.0f64, 2f64.ln() / 2.0);
        let expected = 2.0 * l.powf(-1.0 / q) * ((1.0 / 0.3) * l.powf(0.5 - 1.0 / q)).ln().powf(1.0 / q);
        assert!(close(t.k, expected, 1e-14));
        assert!(optimal_truncation(&mi(100, 10, 1.0, 1.0, 4.0)).is_err());
    }

    #[test]
    fn lq_bennett_examples() {
        let inst = mi(10, 1000, 0.01, 1.0, 3.0);
        let l = 2000f64.ln() / 10.0;
        let expected = l.powf(2.0 / 3.0) * (1e4 * l.powf(1.0 / 3.0)).ln().powf(-2.0 / 3.0);
        assert!(close(lq_bennett_upper(&inst).unwrap(), expected, 1e-13));
        assert!(lq_bennett_upper(&mi(100, 10, 1.0, 1.0, 4.0)).is_err());

        let base = mi(100, 10, 0.05, 1.0, 4.0);
        let lim = limit_expression(&base).unwrap();
        let mut prev_err = f64::INFINITY;
        for q in [8.0, 64.0, 512.0, 4096.0, 1e6] {
            let err = (lq_bennett_upper(&base.with_q(q)).unwrap() / lim - 1.0).abs();
            assert!(err < prev_err);
            prev_err = err;
        }
        assert!(prev_err < 1e-4);
    }

    #[test]
    fn u_star_examples() {
        let c1 = mi(100, 10, 1.0, 1.0, 4.0);
        assert_eq!(u_star(&c1).unwrap(), (20f64.ln() / 100.0).sqrt());
        assert!(u_star_detail(&c1).unwrap().modulo_constant);
        let inf = MomentInstance::new(100, 10, 0.05, 1.0, MomentOrder::Infinite).unwrap();
        assert_eq!(u_star(&inf).unwrap(), e_inf_upper(&inf.bounded()).unwrap());
        for &(n, p, s) in &[(100u64, 10u64, 0.05), (1000, 2, 0.3), (50, 100, 0.01)] {
            let b = mi(n, p, s, 1.0, 4.0);
            assert!(u_star(&b.with_q(8.0)).unwrap() <= 4.0 * u_star(&b).unwrap());
        }
    }

    #[test]
    fn audit_examples() {
        let base = mi(100, 10, 0.05, 1.0, 4.0);
        let r = monotonicity_audit(&base, &[4.0, 4.0, 4.0]).unwrap();
        assert!(r.ratios.iter().all(|x| x.ratio == 1.0));
        let r = monotonicity_audit(&base, &[2.5, 3.0, 4.0, 8.0, 16.0, 64.0]).unwrap();
        assert!(r.all_ok && r.max_ratio <= 4.0);
        assert!(monotonicity_audit(&mi(1, 10, 0.05, 1.0, 4.0), &[3.0]).is_err());

        let anchor = u_star(&base.with_q(2.001)).unwrap();
        for eps in [1e-3, 1e-4] {
            assert!((u_star(&base.with_q(2.0 + eps)).unwrap() / anchor - 1.0).abs() <= 0.05);
        }
    }

    proptest! {
        #[test]
        fn u_star_at_most_b(n in 1u64..100_000, lp in 0.0f64..13.8, ls in -6.9f64..0.0, q in 2.0f64..200.0) {
            let inst = mi(n, lp.exp().round().max(1.0) as u64, ls.exp(), 1.0, q);
            let u = u_star(&inst).unwrap();
            prop_assert!(u > 0.0 && u <= 1.0);
            prop_assert!(u_bound(&inst).unwrap() <= 1.0);
        }

        #[test]
        fn thresholds_positive(n in 1u64..10_000, ls in -4.0f64..0.0, q in 2.1f64..50.0, kb in 1.0f64..20.0, lz in 0.01f64..10.0) {
            let inst = mi(n, 1, ls.exp(), 1.0, q);
            let query = TailQuery::new(lz.exp(), kb).unwrap();
            let t1 = fuk_nagaev_threshold_v1(&query, &inst).unwrap();
            let t2 = fuk_nagaev_threshold_v2(&query, &inst).unwrap();
            prop_assert!(t1 > 0.0 && t1.is_finite());
            prop_assert!(t2 > 0.0 && t2.is_finite());
        }
    }
}
