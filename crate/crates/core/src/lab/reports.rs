//! Report builders: bound sandwiches, the envelope-maximum check, the
//! factor-2 independence reduction and the DKW sampler test.

use rand::RngCore;
use serde::{Deserialize, Serialize};

use super::exact::{exact_bernoulli_expected_max, EXACT_MAX_N};
use super::mc::{estimate_expected_max, replicate, summarize, EstimateResult};
use crate::bounded::{e_inf_bounds, BoundedInstance, Regime};
use crate::dist::{heavy_tail, open_uniform, DistSpec, RngStream, TAU_SQ_FRACTION};
use crate::error::{Error, Result};
use crate::moment::{u_bound, MomentInstance};

/// Instance placed in a sandwich row.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SandwichInstance {
    // listed first so that records with a `q` field deserialize as moments
    Moment(MomentInstance),
    Bounded(BoundedInstance),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SandwichRow {
    pub instance: SandwichInstance,
    pub truth: f64,
    pub truth_se: f64,
    pub lower: f64,
    pub upper: f64,
    pub regime: Regime,
    pub ok: bool,
}

fn sandwich_ok(lower: f64, truth: f64, se: f64, upper: f64) -> bool {
    lower - 3.0 * se <= truth && truth <= upper + 3.0 * se
}

/// E‖X̄‖∞ under the two-point law with values −σ²/B and B: exact when
/// n ≤ [`EXACT_MAX_N`], Monte Carlo otherwise.
pub fn bernoulli_truth(inst: &BoundedInstance, reps: u64, rng: RngStream, workers: usize) -> Result<(f64, f64)> {
    if inst.n <= EXACT_MAX_N {
        return Ok((exact_bernoulli_expected_max(inst)?, 0.0));
    }
    let spec = DistSpec::BernoulliWorst { sigma: inst.sigma, b: inst.b };
    let e = estimate_expected_max(&spec, inst.n, inst.p, reps, rng, workers)?;
    Ok((e.mean, e.std_error))
}

/// One row per instance. Bounded rows carry the q = ∞ lower and upper
/// bounds; moment rows carry the same lower bound and the finite-q upper
/// bound min(B, U). Instance i uses stream (seed, i) when Monte Carlo is
/// needed.
pub fn sandwich_report(grid: &[SandwichInstance], reps: u64, seed: u64, workers: usize) -> Result<Vec<SandwichRow>> {
    grid.iter()
        .enumerate()
        .map(|(i, inst)| {
            let bounded = match inst {
                SandwichInstance::Bounded(b) => *b,
                SandwichInstance::Moment(m) => {
                    m.validate()?;
                    m.bounded()
                }
            };
            let bounds = e_inf_bounds(&bounded)?;
            let upper = match inst {
                SandwichInstance::Bounded(_) => bounds.upper,
                SandwichInstance::Moment(m) => u_bound(m)?,
            };
            let (truth, truth_se) = bernoulli_truth(&bounded, reps, RngStream::new(seed, i as u64), workers)?;
            Ok(SandwichRow {
                instance: *inst,
                truth,
                truth_se,
                lower: bounds.lower,
                upper,
                regime: bounds.regime,
                ok: sandwich_ok(bounds.lower, truth, truth_se, upper),
            })
        })
        .collect()
}

/// Outcome of the envelope-maximum check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MqReport {
    pub n: u64,
    pub q: f64,
    pub b_env: f64,
    pub estimate: EstimateResult,
    /// Exact E max_i ‖Xᵢ‖∞ when the law is two-point.
    pub exact: Option<f64>,
    /// n^{1/q}·B_env.
    pub upper: f64,
    pub upper_ok: bool,
    /// (n/(ln n)²)^{1/q}·(B·1_S + pσ²/B·1_{S^c}) for untruncated product laws.
    pub lower_reference: Option<f64>,
    /// estimate / lower_reference.
    pub lower_constant: Option<f64>,
}

/// max_{i≤n} ‖Xᵢ‖∞ for one replication.
fn max_envelope<R: RngCore + ?Sized>(spec: &DistSpec, n: u64, dim: usize, rng: &mut R, buf: &mut Vec<f64>) -> Result<f64> {
    buf.resize(dim, 0.0);
    let mut m = 0.0f64;
    for _ in 0..n {
        spec.sample_into(rng, buf)?;
        m = buf.iter().fold(m, |a, x| a.max(x.abs()));
    }
    Ok(m)
}

/// Checks E max_{i≤n} ‖Xᵢ‖∞ ≤ n^{1/q}·B_env + 4·SE for a law whose envelope
/// q-norm is at most B_env, and for untruncated product laws reports the
/// constant in the matching lower bound.
pub fn mq_check(spec: &DistSpec, n: u64, q: f64, b_env: f64, reps: u64, rng: RngStream, workers: usize) -> Result<MqReport> {
    spec.validate()?;
    if n == 0 || !(q >= 2.0) || !(b_env > 0.0) {
        return Err(Error::InvalidInstance(format!("mq_check needs n >= 1, q >= 2, B_env > 0 (n={n}, q={q}, B_env={b_env})")));
    }
    let dim = spec.fixed_dim().unwrap_or(1);
    let values = replicate(reps, rng, workers, |r, buf| max_envelope(spec, n, dim as usize, r, buf))?;
    let estimate = summarize(&values, rng.seed);
    let upper = (n as f64).powf(1.0 / q) * b_env;
    let exact = match *spec {
        DistSpec::TwoPoint { tau, k } => Some(two_point_envelope_max(tau, k, n, dim)),
        DistSpec::BernoulliWorst { sigma, b } => Some(two_point_envelope_max(sigma, b, n, dim)),
        _ => None,
    };
    let upper_ok = match exact {
        Some(e) => e <= upper,
        None => estimate.mean <= upper + 4.0 * estimate.std_error,
    };
    let lower_reference = match *spec {
        DistSpec::ProductH { tau, p, truncate: None, .. } if n >= 2 => {
            let sigma = tau / TAU_SQ_FRACTION.sqrt();
            let in_s = 2.0 * p as f64 - 1.0 >= 5.0 * (b_env / sigma).powi(2) / (1.0 + 2.0 * q).powf(2.0 / q);
            let level = if in_s { b_env } else { p as f64 * sigma * sigma / b_env };
            let ln_n = (n as f64).ln();
            Some((n as f64 / (ln_n * ln_n)).powf(1.0 / q) * level)
        }
        _ => None,
    };
    Ok(MqReport {
        n,
        q,
        b_env,
        estimate,
        exact,
        upper,
        upper_ok,
        lower_reference,
        lower_constant: lower_reference.map(|l| estimate.mean / l),
    })
}

/// E max_{i≤n} ‖Xᵢ‖∞ for i.i.d. two-point coordinates: K unless every
/// coordinate of every draw sits at the low value τ²/K.
pub fn two_point_envelope_max(tau: f64, k: f64, n: u64, dim: u64) -> f64 {
    if tau == 0.0 {
        return 0.0;
    }
    let t2 = tau * tau;
    let all_low = ((n * dim) as f64 * (-t2 / (k * k + t2)).ln_1p()).exp();
    k - (k - t2 / k) * all_low
}

/// Dependent vectors with two-point marginals σ, B.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum DependentSpec {
    /// X = w·(1, …, 1).
    FullyCorrelated {
        sigma: f64,
        #[serde(rename = "B")]
        b: f64,
    },
    /// X = w·(1, …, 1, −1, …, −1), first ⌈p/2⌉ coordinates positive.
    AntiSymmetricBlocks {
        sigma: f64,
        #[serde(rename = "B")]
        b: f64,
    },
}

impl DependentSpec {
    fn marginal(&self) -> DistSpec {
        match *self {
            DependentSpec::FullyCorrelated { sigma, b } | DependentSpec::AntiSymmetricBlocks { sigma, b } => {
                DistSpec::BernoulliWorst { sigma, b }
            }
        }
    }

    fn sign(&self, j: usize, p: usize) -> f64 {
        match self {
            DependentSpec::FullyCorrelated { .. } => 1.0,
            DependentSpec::AntiSymmetricBlocks { .. } => {
                if j < p.div_ceil(2) {
                    1.0
                } else {
                    -1.0
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReductionReport {
    pub dependent: EstimateResult,
    pub independent: EstimateResult,
    pub ratio: f64,
    pub ok: bool,
}

/// Compares E‖X̄‖∞ for a dependent vector with the independent-coordinate
/// vector having the same marginals, up to sign. Passes when
/// dep ≤ 2·indep + 4·√(se_dep² + 4·se_indep²). Both estimates use the same
/// stream, so p = 1 gives identical values.
pub fn independence_reduction_check(dep: &DependentSpec, n: u64, p: u64, reps: u64, rng: RngStream, workers: usize) -> Result<ReductionReport> {
    let marginal = dep.marginal();
    marginal.validate()?;
    if n == 0 || p == 0 {
        return Err(Error::InvalidInstance("n and p must be at least 1".into()));
    }
    let pu = p as usize;
    let nf = n as f64;
    let dep_values = replicate(reps, rng, workers, |r, buf| {
        buf.resize(pu + 1, 0.0);
        let (sum, w) = buf.split_at_mut(pu);
        sum.fill(0.0);
        for _ in 0..n {
            marginal.sample_into(r, w)?;
            for (j, s) in sum.iter_mut().enumerate() {
                *s += dep.sign(j, pu) * w[0];
            }
        }
        Ok(sum.iter().fold(0.0f64, |m, s| m.max((s / nf).abs())))
    })?;
    let dependent = summarize(&dep_values, rng.seed);
    let independent = estimate_expected_max(&marginal, n, p, reps.max(super::mc::MIN_REPS_MEAN), rng, workers)?;
    let ratio = dependent.mean / independent.mean;
    let slack = 4.0 * (dependent.std_error.powi(2) + 4.0 * independent.std_error.powi(2)).sqrt();
    Ok(ReductionReport {
        dependent,
        independent,
        ratio,
        ok: dependent.mean <= 2.0 * independent.mean + slack,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DkwReport {
    pub q: f64,
    pub draws: u64,
    pub sup_deviation: f64,
    /// √(ln(2/α)/(2m)).
    pub band: f64,
    pub ok: bool,
}

/// Kolmogorov distance between `draws` samples of G(q) and its CDF,
/// compared against the DKW band at level α.
pub fn dkw_check(q: f64, draws: u64, alpha: f64, rng: RngStream) -> Result<DkwReport> {
    if draws == 0 || !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidInstance(format!("dkw_check needs draws >= 1 and 0 < alpha < 1 (draws={draws}, alpha={alpha})")));
    }
    let mut r = rng.rng();
    let mut xs = (0..draws)
        .map(|_| heavy_tail::quantile(open_uniform(&mut r), q))
        .collect::<Result<Vec<f64>>>()?;
    xs.sort_by(|a, b| a.total_cmp(b));
    let m = draws as f64;
    let mut sup = 0.0f64;
    for (i, &x) in xs.iter().enumerate() {
        let f = heavy_tail::cdf(x, q);
        sup = sup.max((i + 1) as f64 / m - f).max(f - i as f64 / m);
    }
    let band = ((2.0 / alpha).ln() / (2.0 * m)).sqrt();
    Ok(DkwReport {
        q,
        draws,
        sup_deviation: sup,
        band,
        ok: sup <= band,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::solve_envelope_k;

    #[test]
    fn sandwich_rows() {
        let grid = [
            SandwichInstance::Bounded(BoundedInstance::new(20, 10, 0.5, 1.0).unwrap()),
            SandwichInstance::Bounded(BoundedInstance::new(2, 1, 0.01, 1.0).unwrap()),
            SandwichInstance::Bounded(BoundedInstance::new(1, 1000, 1.0, 1.0).unwrap()),
            SandwichInstance::Moment(MomentInstance::finite(100, 10, 0.2, 1.0, 4.0).unwrap()),
        ];
        let rows = sandwich_report(&grid, 1000, 1, 1).unwrap();
        assert_eq!(rows[0].regime, Regime::CaseA);
        assert_eq!(rows[1].regime, Regime::CaseB);
        assert_eq!(rows[2].regime, Regime::AGreaterThanB);
        for r in &rows {
            assert!(r.ok, "{r:?}");
            assert_eq!(r.truth_se, 0.0);
        }
        let b = &rows[1];
        assert!(b.truth >= 0.75 * 0.0001 && b.truth <= 2.0 * 0.0001);
    }

    #[test]
    fn large_n_falls_back_to_mc() {
        let inst = BoundedInstance::new(20_000, 3, 1.0, 1.0).unwrap();
        let rows = sandwich_report(&[SandwichInstance::Bounded(inst)], 200, 3, 4).unwrap();
        assert!(rows[0].truth_se > 0.0);
        assert!(rows[0].ok);
    }

    #[test]
    fn mq_single_draw_jensen() {
        let spec = DistSpec::TwoPoint { tau: 0.5, k: 1.0 };
        let b_env = spec.envelope_moment(3.0, 1).unwrap().powf(1.0 / 3.0);
        let rep = mq_check(&spec, 1, 3.0, b_env, 2000, RngStream::new(1, 0), 2).unwrap();
        assert!(rep.upper_ok);
        assert!(rep.exact.unwrap() <= b_env);
    }

    #[test]
    fn mq_two_point_exact_matches_enumeration() {
        let (tau, k, n, dim) = (0.6f64, 1.0f64, 3u64, 2u64);
        let lo = tau * tau / k;
        let p_lo = k * k / (k * k + tau * tau);
        // enumerate the 2^{n·dim} low/high patterns
        let mut e = 0.0;
        for mask in 0u32..(1 << (n * dim)) {
            let highs = mask.count_ones() as i32;
            let prob = (1.0 - p_lo).powi(highs) * p_lo.powi((n * dim) as i32 - highs);
            e += prob * if highs > 0 { k } else { lo };
        }
        assert!((two_point_envelope_max(tau, k, n, dim) - e).abs() < 1e-15);
        let spec = DistSpec::TwoPoint { tau, k };
        let b_env = spec.envelope_moment(2.0, 1).unwrap().sqrt();
        assert!(mq_check(&spec, 50, 2.0, b_env, 500, RngStream::new(2, 0), 1).unwrap().upper_ok);
    }

    #[test]
    fn mq_product_h() {
        let (sigma, b, q, p) = (0.5, 1.0, 3.0, 4);
        let spec = DistSpec::product_h_for_envelope(sigma, b, q, p).unwrap();
        assert!(solve_envelope_k(sigma, b, q, p).is_ok());
        let rep = mq_check(&spec, 100, q, b, 100_000, RngStream::new(9, 0), 8).unwrap();
        assert!(rep.upper_ok, "{rep:?}");
        assert!(rep.lower_constant.unwrap() > 0.0);
    }

    #[test]
    fn reduction_checks() {
        let dep = DependentSpec::FullyCorrelated { sigma: 1.0, b: 1.0 };
        let r = independence_reduction_check(&dep, 10, 5, 20_000, RngStream::new(4, 0), 4).unwrap();
        assert!(r.ok && r.ratio <= 2.0, "{r:?}");
        let one = independence_reduction_check(&dep, 10, 1, 2_000, RngStream::new(4, 1), 4).unwrap();
        assert_eq!(one.ratio, 1.0);
        let anti = DependentSpec::AntiSymmetricBlocks { sigma: 0.3, b: 1.0 };
        let r = independence_reduction_check(&anti, 10, 6, 20_000, RngStream::new(4, 2), 4).unwrap();
        assert!(r.ok && r.ratio <= 2.0, "{r:?}");
    }

    #[test]
    fn dkw_passes_and_detects_shift() {
        let rep = dkw_check(3.0, 100_000, 0.01, RngStream::new(12, 0)).unwrap();
        assert!(rep.ok, "{rep:?}");
        // samples from G(5) against the G(3) CDF
        let mut r = RngStream::new(12, 1).rng();
        let mut xs: Vec<f64> = (0..100_000).map(|_| heavy_tail::quantile(open_uniform(&mut r), 5.0).unwrap()).collect();
        xs.sort_by(|a, b| a.total_cmp(b));
        let m = xs.len() as f64;
        let sup = xs.iter().enumerate().fold(0.0f64, |s, (i, &x)| {
            let f = heavy_tail::cdf(x, 3.0);
            s.max((i + 1) as f64 / m - f).max(f - i as f64 / m)
        });
        assert!(sup > rep.band);
    }
}
