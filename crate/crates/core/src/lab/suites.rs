//! Named verification suites. Each suite returns a list of check rows whose
//! content depends only on the seed and the replication count.

use std::f64::consts::{E, SQRT_2};
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::exact::{
    bernoulli_kl, binomial_union_bracket, binomial_upper_tail, exact_bernoulli_expected_max, inclusion_exclusion_bracket,
    normal_cdf,
};
use super::mc::{empirical_tails, estimate_expected_max, sample_means, tail_from_means, MIN_REPS_TAIL};
use super::reports::{dkw_check, independence_reduction_check, mq_check, DependentSpec};
use crate::bounded::{
    bennett_integral, correction_term, regime, threshold_a, BoundedInstance, Regime, LOWER_CONSTANT, SANDWICH_LOWER_CONSTANT,
};
use crate::dist::{envelope_residual, solve_envelope_k, DistSpec, RngStream};
use crate::dist::envelope::ln_envelope_f;
use crate::error::{Error, Result};
use crate::moment::{
    limit_expression, literature_baseline, monotonicity_audit, moment_case, u_star, MomentInstance, QCase, TailQuery,
    MONOTONICITY_FACTOR,
};
use crate::moment::{fuk_nagaev_threshold_v1, fuk_nagaev_threshold_v2};
use crate::special::{iterated_log_solve, lambert_w, psi, psi_inv, psi_prime_at_inv};

/// Relative slack for the special-function inequalities.
pub const LEMMA_SLACK: f64 = 1e-12;
/// Relative quadrature slack for the Bennett integral sandwich.
pub const QUADRATURE_SLACK: f64 = 1e-6;
/// Tolerance on |U*(4096)/limit − 1|.
pub const LIMIT_TOLERANCE: f64 = 0.05;
/// Factor on the literature baseline.
pub const BASELINE_FACTOR: f64 = 5.0;
/// Draws for the DKW test.
pub const DKW_DRAWS: u64 = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    Lemmas,
    SandwichInf,
    TailsQ,
    Monotonicity,
    Mq,
}

impl Suite {
    pub const ALL: [Suite; 5] = [Suite::Lemmas, Suite::SandwichInf, Suite::TailsQ, Suite::Monotonicity, Suite::Mq];

    pub fn name(&self) -> &'static str {
        match self {
            Suite::Lemmas => "lemmas",
            Suite::SandwichInf => "sandwich-inf",
            Suite::TailsQ => "tails-q",
            Suite::Monotonicity => "monotonicity",
            Suite::Mq => "mq",
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| Error::InvalidInstance(format!("unknown suite '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SuiteConfig {
    pub reps: u64,
    pub seed: u64,
    pub workers: usize,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        SuiteConfig {
            reps: 20_000,
            seed: 1,
            workers: 1,
        }
    }
}

/// One verified property: `observed` must lie in [lower, upper] where
/// given, up to the slack stated in the check name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckRow {
    pub suite: String,
    pub check: String,
    pub observed: f64,
    pub lower: Option<f64>,
    pub upper: Option<f64>,
    pub ok: bool,
}

impl CheckRow {
    fn new(suite: Suite, check: impl Into<String>, observed: f64, lower: Option<f64>, upper: Option<f64>, ok: bool) -> Self {
        CheckRow {
            suite: suite.name().to_string(),
            check: check.into(),
            observed,
            lower,
            upper,
            ok,
        }
    }
}

pub fn run_suite(suite: Suite, config: &SuiteConfig) -> Result<Vec<CheckRow>> {
    match suite {
        Suite::Lemmas => lemmas(config),
        Suite::SandwichInf => sandwich_inf(config),
        Suite::TailsQ => tails_q(config),
        Suite::Monotonicity => monotonicity(),
        Suite::Mq => mq(config),
    }
}

/// `count` points log-spaced on [a, b].
pub fn log_grid(a: f64, b: f64, count: usize) -> Vec<f64> {
    let (la, lb) = (a.ln(), b.ln());
    (0..count)
        .map(|i| (la + (lb - la) * i as f64 / (count - 1) as f64).exp())
        .collect()
}

/// Relative excess of `lhs` over `rhs`; ≤ 0 when lhs ≤ rhs.
fn excess(lhs: f64, rhs: f64) -> f64 {
    let scale = lhs.abs().max(rhs.abs()).max(f64::MIN_POSITIVE);
    (lhs - rhs) / scale
}

/// Row for "lhs(x) ≤ rhs(x) on the grid", reporting the worst excess.
fn inequality_row<F>(check: &str, grid: &[f64], f: F) -> Result<CheckRow>
where
    F: Fn(f64) -> Result<(f64, f64)>,
{
    let mut worst = f64::NEG_INFINITY;
    for &x in grid {
        let (l, r) = f(x)?;
        let e = excess(l, r);
        worst = worst.max(if e.is_nan() { f64::INFINITY } else { e });
    }
    Ok(CheckRow::new(
        Suite::Lemmas,
        format!("{check} [{} points]", grid.len()),
        worst,
        None,
        Some(LEMMA_SLACK),
        worst <= LEMMA_SLACK,
    ))
}

fn with_zero(mut v: Vec<f64>) -> Vec<f64> {
    v.insert(0, 0.0);
    v
}

fn lemmas(config: &SuiteConfig) -> Result<Vec<CheckRow>> {
    let s = Suite::Lemmas;
    let mut rows = Vec::new();
    let pos = with_zero(log_grid(1e-8, 1e6, 600));
    let to_e = with_zero(log_grid(1e-10, E, 600));
    let above_one: Vec<f64> = log_grid(1e-8, 1e6, 600).into_iter().map(|d| 1.0 + d).collect();

    let mut worst = 0.0f64;
    for &x in &pos {
        worst = worst.max((psi_inv(psi(x)?)? - x).abs() / (1.0 + x));
    }
    rows.push(CheckRow::new(s, format!("psi_inv(psi(x)) = x on [0, 1e6] [{} points]", pos.len()), worst, None, Some(LEMMA_SLACK), worst <= LEMMA_SLACK));

    let mut w_grid: Vec<f64> = log_grid(1e-14, 1.0, 300).into_iter().map(|d| -(1.0 - d) / E).collect();
    w_grid.extend(with_zero(log_grid(1e-8, 1e6, 300)));
    let mut worst = 0.0f64;
    for &x in &w_grid {
        let w = lambert_w(x)?;
        worst = worst.max((w * w.exp() - x).abs() / (1.0 + x.abs()));
    }
    rows.push(CheckRow::new(s, format!("lambert_w residual on [-1/e, 1e6] [{} points]", w_grid.len()), worst, None, Some(LEMMA_SLACK), worst <= LEMMA_SLACK));

    rows.push(inequality_row("(1-1/e)ln(1+x) <= W(x), x >= 0", &pos, |x| Ok(((1.0 - 1.0 / E) * x.ln_1p(), lambert_w(x)?)))?);
    rows.push(inequality_row("W(x) <= ln(1+x), x >= 0", &pos, |x| Ok((lambert_w(x)?, x.ln_1p())))?);
    rows.push(inequality_row("ln x - ln ln(x(1+1/e)/ln x) <= W(x), x > 1", &above_one, |x| {
        let l = x.ln();
        Ok((l - (x * (1.0 + 1.0 / E) / l).ln().ln(), lambert_w(x)?))
    })?);

    rows.push(inequality_row("sqrt(2x) <= psi_inv(x), x in [0, e]", &to_e, |x| Ok(((2.0 * x).sqrt(), psi_inv(x)?)))?);
    rows.push(inequality_row("psi_inv(x) <= 2 sqrt(2x), x in [0, e]", &to_e, |x| Ok((psi_inv(x)?, 2.0 * (2.0 * x).sqrt())))?);
    let closed = |x: f64| (x - 1.0) / ((x - 1.0) / E).ln_1p() - 1.0;
    rows.push(inequality_row("(x-1)/ln(1+(x-1)/e) - 1 <= psi_inv(x), x > 1", &above_one, |x| Ok((closed(x), psi_inv(x)?)))?);
    rows.push(inequality_row("psi_inv(x) <= 2[(x-1)/ln(1+(x-1)/e) - 1], x > 1", &above_one, |x| Ok((psi_inv(x)?, 2.0 * closed(x))))?);

    let small = log_grid(1e-10, E, 600);
    rows.push(inequality_row("ln(1+x)/sqrt2 <= sqrt2 ln(1+sqrt x), x in (0, e]", &small, |x| Ok((x.ln_1p() / SQRT_2, SQRT_2 * x.sqrt().ln_1p())))?);
    rows.push(inequality_row("sqrt2 ln(1+sqrt x) <= psi'(psi_inv(x)), x in (0, e]", &small, |x| Ok((SQRT_2 * x.sqrt().ln_1p(), psi_prime_at_inv(x)?)))?);
    rows.push(inequality_row("psi'(psi_inv(x)) <= 1.5 ln(1+sqrt x), x in (0, e]", &small, |x| Ok((psi_prime_at_inv(x)?, 1.5 * x.sqrt().ln_1p())))?);
    rows.push(inequality_row("ln(1+x)/sqrt2 <= psi'(psi_inv(x)), x > 1", &above_one, |x| Ok((x.ln_1p() / SQRT_2, psi_prime_at_inv(x)?)))?);
    rows.push(inequality_row("psi'(psi_inv(x)) <= ln(1+x)/ln2, x > 1", &above_one, |x| Ok((psi_prime_at_inv(x)?, x.ln_1p() / std::f64::consts::LN_2)))?);

    let c1: Vec<f64> = log_grid(1e-9, 1e6, 600).into_iter().map(|d| E.sqrt() + d).collect();
    let mid = |x: f64| Ok::<f64, Error>(psi(x)? / ((1.0 + x) * x.ln_1p().powi(2)));
    rows.push(inequality_row("1/(6 ln x) <= 1/(3 ln(1+x)), x > sqrt e", &c1, |x| Ok((1.0 / (6.0 * x.ln()), 1.0 / (3.0 * x.ln_1p()))))?);
    rows.push(inequality_row("1/(3 ln(1+x)) <= psi(x)/((1+x)ln^2(1+x)), x > sqrt e", &c1, |x| Ok((1.0 / (3.0 * x.ln_1p()), mid(x)?)))?);
    rows.push(inequality_row("psi(x)/((1+x)ln^2(1+x)) <= 1/ln(1+x), x > sqrt e", &c1, |x| Ok((mid(x)?, 1.0 / x.ln_1p())))?);
    rows.push(inequality_row("1/ln(1+x) <= 1/ln x, x > sqrt e", &c1, |x| Ok((1.0 / x.ln_1p(), 1.0 / x.ln())))?);

    let c3 = log_grid(E, 1e6, 600);
    let g = |x: f64| Ok::<f64, Error>(-x * lambert_w(-1.0 / x)?);
    rows.push(inequality_row("1 <= -x W(-1/x), x >= e", &c3, |x| Ok((1.0, g(x)?)))?);
    rows.push(inequality_row("-x W(-1/x) <= e, x >= e", &c3, |x| Ok((g(x)?, E)))?);
    let mut worst = f64::NEG_INFINITY;
    for pair in c3.windows(2) {
        worst = worst.max(excess(g(pair[1])?, g(pair[0])?));
    }
    rows.push(CheckRow::new(s, format!("-x W(-1/x) decreasing, x >= e [{} points]", c3.len()), worst, None, Some(LEMMA_SLACK), worst <= LEMMA_SLACK));

    rows.push(inequality_row("x/3 <= ln(1+x), x in [0, e]", &to_e, |x| Ok((x / 3.0, x.ln_1p())))?);
    let half: Vec<f64> = log_grid(1e-9, 1e6, 600).into_iter().map(|d| 0.5 + d).collect();
    rows.push(inequality_row("ln 2x <= 1.25 ln(2x/sqrt(ln 2x)), x >= 1/2", &half, |x| {
        let l = (2.0 * x).ln();
        Ok((l, 1.25 * (2.0 * x / l.sqrt()).ln()))
    })?);

    // two-parameter grid: x log-spaced, xy = 1 + d with d log-spaced
    let xs = log_grid(1e-3, 1e3, 25);
    let ds = log_grid(1e-6, 1e6, 25);
    let mut worst = f64::NEG_INFINITY;
    for &x in &xs {
        for &d in &ds {
            let y = (1.0 + d) / x;
            let u = d / E;
            let lhs = u / u.ln_1p();
            let v = (1.0 + x) * y;
            worst = worst.max(excess(lhs, v / v.ln()));
        }
    }
    rows.push(CheckRow::new(s, format!("((xy-1)/e)/ln(1+(xy-1)/e) <= (1+x)y/ln((1+x)y), xy > 1 [{} points]", xs.len() * ds.len()), worst, None, Some(LEMMA_SLACK), worst <= LEMMA_SLACK));

    let mut worst = 0.0f64;
    let cs = log_grid(E * (1.0 + 1e-6), 1e12, 200);
    for &q in &[1.0, 2.0, 4.0] {
        for &c in &cs {
            let x = iterated_log_solve(c, q)?;
            worst = worst.max((x.powf(q) / (q * x.ln()) - c).abs() / c);
        }
    }
    rows.push(CheckRow::new(s, format!("iterated_log_solve residual, c in (e, 1e12], q in {{1,2,4}} [{} points]", 3 * cs.len()), worst, None, Some(1e-10), worst <= 1e-10));

    let mut rng = RngStream::new(config.seed, 0).rng();
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..500 {
        let len = rng.random_range(1..=40);
        let probs: Vec<f64> = (0..len).map(|_| rng.random::<f64>()).collect();
        let (lo, mid, hi) = inclusion_exclusion_bracket(&probs);
        worst = worst.max(excess(lo, mid)).max(excess(mid, hi));
    }
    rows.push(CheckRow::new(s, "inclusion-exclusion bracket on random probability vectors [500 vectors]", worst, None, Some(LEMMA_SLACK), worst <= LEMMA_SLACK));

    let mut worst = f64::NEG_INFINITY;
    let mut count = 0;
    for &x in &log_grid(1e-6, 1.0 - 1e-6, 100) {
        for &p in &[1u64, 2, 3, 10, 50, 100, 500, 1000] {
            let (lo, mid, hi) = binomial_union_bracket(x, p);
            worst = worst.max(excess(lo, mid)).max(excess(mid, hi));
            count += 1;
        }
    }
    rows.push(CheckRow::new(s, format!("px - C(p,2)x^2 <= 1-(1-x)^p <= px [{count} points]"), worst, None, Some(LEMMA_SLACK), worst <= LEMMA_SLACK));

    let phi = |x: f64| (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let mills = log_grid(1e-3, 30.0, 600);
    rows.push(inequality_row("phi(x)/(x+1) <= 1 - Phi(x), x > 0", &mills, |x| Ok((phi(x) / (x + 1.0), normal_cdf(-x))))?);
    rows.push(inequality_row("1 - Phi(x) <= phi(x)/x, x > 0", &mills, |x| Ok((normal_cdf(-x), phi(x) / x)))?);

    let mut worst = f64::NEG_INFINITY;
    let mut count = 0;
    for &n in &[5u64, 20, 100, 400, 2000] {
        for &theta in &[0.01, 0.05, 0.1, 0.3, 0.5, 0.8] {
            let start = (n as f64 * theta).ceil() as u64;
            for k in start..=n {
                let bound = normal_cdf(-(2.0 * n as f64 * bernoulli_kl(k as f64 / n as f64, theta)).sqrt());
                if bound > 1e-300 {
                    worst = worst.max(excess(bound, binomial_upper_tail(n, theta, k)));
                    count += 1;
                }
            }
        }
    }
    rows.push(CheckRow::new(s, format!("Phi(-sqrt(2n KL(k/n, theta))) <= P(Bin(n, theta) >= k) [{count} points]"), worst, None, Some(1e-9), worst <= 1e-9));
    Ok(rows)
}

fn fmt_inst(inst: &BoundedInstance) -> String {
    format!("n={} p={} sigma={:e} B={:e}", inst.n, inst.p, inst.sigma, inst.b)
}

/// The 200-instance grid for the Bennett integral sandwich.
pub fn bennett_grid() -> Vec<BoundedInstance> {
    let b = 2.0;
    let mut out = Vec::new();
    for &n in &[2u64, 10, 100, 1000, 10_000] {
        for &p in &[1u64, 10, 1000, 1_000_000] {
            for r in log_grid(1e-3, 1.0, 10) {
                out.push(BoundedInstance { n, p, sigma: r * b, b });
            }
        }
    }
    out
}

fn candidates(ns: &[u64], ps: &[u64], ratios: &[f64]) -> Vec<BoundedInstance> {
    let mut out = Vec::new();
    for &n in ns {
        for &p in ps {
            for &r in ratios {
                out.push(BoundedInstance { n, p, sigma: r, b: 1.0 });
            }
        }
    }
    out
}

/// `count` members of `pool` with the given regime, evenly spread.
fn pick(pool: &[BoundedInstance], want: Regime, count: usize) -> Result<Vec<BoundedInstance>> {
    let mut hits = Vec::new();
    for inst in pool {
        if regime(inst)? == want {
            hits.push(*inst);
        }
    }
    if hits.len() < count {
        return Err(Error::InvalidInstance(format!("only {} {want:?} candidates, need {count}", hits.len())));
    }
    Ok((0..count).map(|i| hits[i * hits.len() / count]).collect())
}

/// 100 CaseA instances with n ≤ 50, 30 CaseB and 10 A > B instances.
pub fn exact_sandwich_grid() -> Result<(Vec<BoundedInstance>, Vec<BoundedInstance>, Vec<BoundedInstance>)> {
    let case_a = candidates(&[2, 3, 5, 8, 12, 20, 30, 50], &[1, 2, 5, 10, 50, 100, 1000], &[1.0, 0.5, 0.2, 0.1, 0.05]);
    let case_b = candidates(&[1, 2, 5, 10, 50, 100, 1000, 10_000], &[1, 2, 5, 10, 100], &[1e-1, 3e-2, 1e-2, 1e-3]);
    let a_gt_b = candidates(&[1, 2, 3], &[1, 10, 100, 10_000, 1_000_000], &[1.0, 0.7, 0.5, 0.2]);
    Ok((pick(&case_a, Regime::CaseA, 100)?, pick(&case_b, Regime::CaseB, 30)?, pick(&a_gt_b, Regime::AGreaterThanB, 10)?))
}

fn sandwich_inf(config: &SuiteConfig) -> Result<Vec<CheckRow>> {
    let s = Suite::SandwichInf;
    let mut rows = Vec::new();
    for inst in bennett_grid() {
        let a = threshold_a(&inst)?;
        let corr = correction_term(&inst)?;
        let base = a.min(inst.b);
        let (lo, hi) = (base + SANDWICH_LOWER_CONSTANT * corr, base + corr);
        let integral = bennett_integral(&inst)?;
        let ok = integral >= lo * (1.0 - QUADRATURE_SLACK) && integral <= hi * (1.0 + QUADRATURE_SLACK);
        rows.push(CheckRow::new(s, format!("Bennett integral sandwich {}", fmt_inst(&inst)), integral, Some(lo), Some(hi), ok));
    }

    let (case_a, case_b, a_gt_b) = exact_sandwich_grid()?;
    for inst in case_a {
        let upper = crate::bounded::e_inf_upper(&inst)?;
        let truth = exact_bernoulli_expected_max(&inst)?;
        let lo = upper * LOWER_CONSTANT;
        rows.push(CheckRow::new(s, format!("exact CaseA in [upper/3825, upper] {}", fmt_inst(&inst)), truth, Some(lo), Some(upper), lo <= truth && truth <= upper));
    }
    for inst in case_b {
        let v = inst.sigma * inst.sigma;
        let p = inst.p as f64;
        let (lo, hi) = (0.75 * p * v / inst.b, (p + 1.0) * v / inst.b);
        let truth = exact_bernoulli_expected_max(&inst)?;
        rows.push(CheckRow::new(s, format!("exact CaseB in [3p sigma^2/(4B), (p+1) sigma^2/B] {}", fmt_inst(&inst)), truth, Some(lo), Some(hi), lo <= truth && truth <= hi));
    }
    for inst in a_gt_b {
        let lo = inst.b * LOWER_CONSTANT;
        let truth = exact_bernoulli_expected_max(&inst)?;
        rows.push(CheckRow::new(s, format!("exact A>B in [B/3825, B] {}", fmt_inst(&inst)), truth, Some(lo), Some(inst.b), lo <= truth && truth <= inst.b));
    }

    let mc_grid = [(3u64, 2u64, 0.5), (5, 3, 1.0), (10, 5, 0.3), (20, 10, 0.1), (50, 4, 0.7), (8, 100, 0.2)];
    for (i, &(n, p, sigma)) in mc_grid.iter().enumerate() {
        let inst = BoundedInstance { n, p, sigma, b: 1.0 };
        let exact = exact_bernoulli_expected_max(&inst)?;
        let spec = DistSpec::BernoulliWorst { sigma, b: 1.0 };
        let e = estimate_expected_max(&spec, n, p, config.reps, RngStream::new(config.seed, 100 + i as u64), config.workers)?;
        let (lo, hi) = (exact - 4.0 * e.std_error, exact + 4.0 * e.std_error);
        rows.push(CheckRow::new(s, format!("Monte Carlo within 4 SE of exact {}", fmt_inst(&inst)), e.mean, Some(lo), Some(hi), lo <= e.mean && e.mean <= hi));
    }

    let deps = [
        (DependentSpec::FullyCorrelated { sigma: 1.0, b: 1.0 }, 10u64, 5u64),
        (DependentSpec::FullyCorrelated { sigma: 0.2, b: 1.0 }, 20, 50),
        (DependentSpec::AntiSymmetricBlocks { sigma: 1.0, b: 1.0 }, 10, 6),
        (DependentSpec::AntiSymmetricBlocks { sigma: 0.3, b: 1.0 }, 30, 20),
    ];
    for (i, (dep, n, p)) in deps.iter().enumerate() {
        let r = independence_reduction_check(dep, *n, *p, config.reps, RngStream::new(config.seed, 200 + i as u64), config.workers)?;
        let slack = 4.0 * (r.dependent.std_error.powi(2) + 4.0 * r.independent.std_error.powi(2)).sqrt();
        let name = match dep {
            DependentSpec::FullyCorrelated { .. } => "fully correlated",
            DependentSpec::AntiSymmetricBlocks { .. } => "anti-symmetric blocks",
        };
        rows.push(CheckRow::new(
            s,
            format!("dependent <= 2 x independent ({name}) n={n} p={p}"),
            r.dependent.mean,
            None,
            Some(2.0 * r.independent.mean + slack),
            r.ok,
        ));
    }
    Ok(rows)
}

/// Scalar law with its variance, q-th moment bound and almost-sure bound.
#[derive(Debug, Clone, Copy)]
pub struct TailCase {
    pub spec: DistSpec,
    pub label: &'static str,
    pub ess_sup: f64,
}

pub fn tail_cases() -> Vec<TailCase> {
    vec![
        TailCase {
            spec: DistSpec::TwoPoint { tau: 0.3, k: 1.0 },
            label: "two-point tau=0.3 K=1",
            ess_sup: 1.0,
        },
        TailCase {
            spec: DistSpec::TwoPoint { tau: 0.1, k: 1.0 },
            label: "two-point tau=0.1 K=1",
            ess_sup: 1.0,
        },
        TailCase {
            spec: DistSpec::ProductH {
                q: 3.0,
                tau: 0.3,
                k: 1.0,
                p: 5,
                truncate: Some(3.0),
            },
            label: "truncated product q=3 tau=0.3 K=1 p=5 c=3",
            ess_sup: 3.0,
        },
    ]
}

fn tails_q(config: &SuiteConfig) -> Result<Vec<CheckRow>> {
    let s = Suite::TailsQ;
    let reps = config.reps.max(MIN_REPS_TAIL);
    let mut rows = Vec::new();
    let mut stream = 0u64;
    for case in tail_cases() {
        let sigma = case.spec.coordinate_moment(2.0)?.sqrt();
        for &n in &[50u64, 100] {
            let means = sample_means(&case.spec, n, reps, RngStream::new(config.seed, stream), config.workers)?;
            stream += 1;
            for &q in &[3.0, 4.0] {
                let b = case.spec.coordinate_moment(q)?.powf(1.0 / q);
                let inst = MomentInstance::finite(n, 1, sigma, b, q)?;
                for &z in &[2.0, 10.0, 100.0] {
                    let query = TailQuery::new(z, case.ess_sup)?;
                    for (version, t) in [("v1", fuk_nagaev_threshold_v1(&query, &inst)?), ("v2", fuk_nagaev_threshold_v2(&query, &inst)?)] {
                        let est = tail_from_means(&means, t);
                        let se = ((1.0 / z) * (1.0 - 1.0 / z) / reps as f64).sqrt();
                        let hi = 1.0 / z + 3.0 * se;
                        rows.push(CheckRow::new(
                            s,
                            format!("P(mean >= {version}) <= 1/z + 3 SE: {} n={n} q={q} z={z} t={t:e}", case.label),
                            est.freq,
                            None,
                            Some(hi),
                            est.freq <= hi,
                        ));
                    }
                }
            }
        }
    }
    let spec = DistSpec::TwoPoint { tau: 0.3, k: 1.0 };
    let inf = empirical_tails(&spec, 10, &[f64::INFINITY], reps, RngStream::new(config.seed, stream), config.workers)?;
    rows.push(CheckRow::new(s, "P(mean >= +inf) = 0", inf[0].freq, Some(0.0), Some(0.0), inf[0].count == 0));
    Ok(rows)
}

/// The 20 instances for the q-monotonicity audit and the q → ∞ limit.
pub fn monotonicity_grid() -> Vec<MomentInstance> {
    let mut out = Vec::new();
    for &(n, p) in &[(100u64, 10u64), (1000, 1000), (50, 5), (10_000, 1_000_000)] {
        for &r in &[3.0, 10.0, 100.0, 1e4, 1e6] {
            let l = (2.0 * p as f64).ln() / n as f64;
            out.push(MomentInstance::finite(n, p, (l / r).sqrt(), 1.0, 4.0).expect("grid instance"));
        }
    }
    out
}

/// 50 case-2 instances for the comparison against the literature baseline.
pub fn baseline_grid() -> Vec<MomentInstance> {
    let mut out = Vec::new();
    for &(n, p) in &[(100u64, 10u64), (1000, 1000)] {
        for &r in &[300.0, 1e3, 1e4, 1e5, 1e6] {
            let l = (2.0 * p as f64).ln() / n as f64;
            out.push(MomentInstance::finite(n, p, (l / r).sqrt(), 1.0, 3.0).expect("grid instance"));
        }
    }
    let qs = [3.0, 4.0, 8.0, 16.0, 64.0];
    out.iter().flat_map(|m| qs.iter().map(move |&q| m.with_q(q))).collect()
}

pub const MONOTONICITY_Q_GRID: [f64; 7] = [2.5, 3.0, 4.0, 8.0, 16.0, 64.0, 256.0];

fn fmt_moment(m: &MomentInstance) -> String {
    format!("n={} p={} sigma={:e} B={:e}", m.n, m.p, m.sigma, m.b)
}

fn monotonicity() -> Result<Vec<CheckRow>> {
    let s = Suite::Monotonicity;
    let mut rows = Vec::new();
    for inst in monotonicity_grid() {
        let audit = monotonicity_audit(&inst, &MONOTONICITY_Q_GRID)?;
        rows.push(CheckRow::new(
            s,
            format!("max adjacent U* ratio over q in {{2.5..256}} {}", fmt_moment(&inst)),
            audit.max_ratio,
            None,
            Some(MONOTONICITY_FACTOR),
            audit.all_ok && audit.max_ratio <= MONOTONICITY_FACTOR,
        ));
        let far = inst.with_q(4096.0);
        let dev = (u_star(&far)? / limit_expression(&far)? - 1.0).abs();
        rows.push(CheckRow::new(s, format!("|U*(4096)/limit - 1| {}", fmt_moment(&inst)), dev, None, Some(LIMIT_TOLERANCE), dev <= LIMIT_TOLERANCE));
    }
    let grid = baseline_grid();
    for chunk in grid.chunks(5) {
        let mut ratios = Vec::new();
        for inst in chunk {
            let case_two = moment_case(inst)? == QCase::Case2;
            let u = u_star(inst)?;
            let base = literature_baseline(inst)?;
            ratios.push(u / base);
            rows.push(CheckRow::new(
                s,
                format!("U* <= 5 x baseline (case 2) {} q={}", fmt_moment(inst), inst.q.value()),
                u,
                None,
                Some(BASELINE_FACTOR * base),
                case_two && u <= BASELINE_FACTOR * base,
            ));
        }
        let (first, last) = (ratios[0], ratios[ratios.len() - 1]);
        rows.push(CheckRow::new(
            s,
            format!("U*/baseline at q=64 below q=3 {}", fmt_moment(&chunk[0])),
            last,
            None,
            Some(first),
            last < first,
        ));
    }
    Ok(rows)
}

/// 100-point (σ, B, q, p) grid for the envelope solver.
pub fn envelope_grid() -> Vec<(f64, f64, f64, u64)> {
    let mut out = Vec::new();
    for &sigma in &[0.2, 1.0] {
        for &ratio in &[1.0, 1.5, 3.0, 10.0, 30.0] {
            for &q in &[2.5, 3.0, 4.0, 8.0, 16.0] {
                for &p in &[1u64, 10] {
                    out.push((sigma, ratio * sigma, q, p));
                }
            }
        }
    }
    out
}

fn mq(config: &SuiteConfig) -> Result<Vec<CheckRow>> {
    let s = Suite::Mq;
    let mut rows = Vec::new();
    for (sigma, b, q, p) in envelope_grid() {
        let label = format!("sigma={sigma} B={b} q={q} p={p}");
        let k = solve_envelope_k(sigma, b, q, p)?;
        // residual relative to B^q
        let res = envelope_residual(k, sigma, b, q, p).abs();
        rows.push(CheckRow::new(s, format!("envelope residual / B^q {label}"), res, None, Some(1e-10), res <= 1e-10));
        let floor = b / (1.0 + 2.0 * q).powf(1.0 / q);
        rows.push(CheckRow::new(s, format!("K >= B/(1+2q)^(1/q) {label}"), k, Some(floor), None, k >= floor));
        // F on 50 points of [1, y*·4], checked for monotone increase
        let y_star = 5f64.sqrt() * k / sigma;
        let ys = log_grid(1.0, 4.0 * y_star, 50);
        let mut worst = f64::NEG_INFINITY;
        for pair in ys.windows(2) {
            worst = worst.max(ln_envelope_f(pair[0].ln(), q, p) - ln_envelope_f(pair[1].ln(), q, p));
        }
        rows.push(CheckRow::new(s, format!("F increasing on 50 points {label}"), worst, None, Some(0.0), worst < 0.0));
    }

    for (i, &q) in [2.0, 3.0, 5.0, 10.0].iter().enumerate() {
        let rep = dkw_check(q, DKW_DRAWS, 0.01, RngStream::new(config.seed, 300 + i as u64))?;
        rows.push(CheckRow::new(s, format!("DKW sup |F_m - F| for G(q) q={q} alpha=0.01"), rep.sup_deviation, None, Some(rep.band), rep.ok));
    }

    let product = DistSpec::product_h_for_envelope(0.5, 1.0, 3.0, 5)?;
    let g = DistSpec::HeavyTailG { q: 3.0 };
    let two = DistSpec::TwoPoint { tau: 0.3, k: 1.0 };
    let cases = [
        (product, 3.0, 1.0, "product law sigma=0.5 B=1 q=3 p=5"),
        (g, 3.0, g.envelope_moment(3.0, 1)?.powf(1.0 / 3.0), "G(3)"),
        (two, 2.0, two.envelope_moment(2.0, 1)?.sqrt(), "two-point tau=0.3 K=1"),
    ];
    let mut stream = 400u64;
    for (spec, q, b_env, label) in cases {
        for &n in &[10u64, 100, 1000] {
            let rep = mq_check(&spec, n, q, b_env, config.reps, RngStream::new(config.seed, stream), config.workers)?;
            stream += 1;
            let observed = rep.exact.unwrap_or(rep.estimate.mean);
            let slack = if rep.exact.is_some() { 0.0 } else { 4.0 * rep.estimate.std_error };
            rows.push(CheckRow::new(
                s,
                format!("E max ||X_i|| <= n^(1/q) B_env + 4 SE: {label} n={n}"),
                observed,
                None,
                Some(rep.upper + slack),
                rep.upper_ok,
            ));
            if let (Some(reference), Some(c)) = (rep.lower_reference, rep.lower_constant) {
                rows.push(CheckRow::new(
                    s,
                    format!("lower-bound constant c = E max / reference (reported): {label} n={n} reference={reference:e}"),
                    c,
                    Some(0.0),
                    None,
                    c.is_finite() && c > 0.0,
                ));
            }
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_names_round_trip() {
        for s in Suite::ALL {
            assert_eq!(s.name().parse::<Suite>().unwrap(), s);
        }
        assert!("nosuch".parse::<Suite>().is_err());
    }

    #[test]
    fn grid_sizes() {
        assert_eq!(bennett_grid().len(), 200);
        let (a, b, c) = exact_sandwich_grid().unwrap();
        assert_eq!((a.len(), b.len(), c.len()), (100, 30, 10));
        assert!(a.iter().all(|i| i.n <= 50));
        assert_eq!(monotonicity_grid().len(), 20);
        assert!(monotonicity_grid().iter().all(|m| m.l() <= 1.0));
        assert_eq!(baseline_grid().len(), 50);
        assert_eq!(envelope_grid().len(), 100);
    }

    #[test]
    fn log_grid_endpoints() {
        let g = log_grid(1e-3, 1e3, 7);
        assert_eq!(g.len(), 7);
        assert!((g[0] - 1e-3).abs() < 1e-18 && (g[6] - 1e3).abs() < 1e-9);
        assert!((g[3] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn lemmas_pass() {
        let rows = run_suite(Suite::Lemmas, &SuiteConfig::default()).unwrap();
        for r in &rows {
            assert!(r.ok, "{r:?}");
        }
    }

    #[test]
    fn monotonicity_passes() {
        for r in run_suite(Suite::Monotonicity, &SuiteConfig::default()).unwrap() {
            assert!(r.ok, "{r:?}");
        }
    }
}
