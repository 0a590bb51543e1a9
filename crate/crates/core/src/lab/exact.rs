//! Exact finite-sum oracles and small probability helpers.

use std::f64::consts::SQRT_2;

use statrs::function::erf::{erfc, erfc_inv};

use crate::bounded::BoundedInstance;
use crate::error::{Error, Result};

/// Largest n accepted by the exact oracle.
pub const EXACT_MAX_N: u64 = 10_000;

/// Φ(x) = ½ erfc(−x/√2).
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / SQRT_2)
}

/// Two-sided standard normal quantile for confidence level `level`.
pub fn normal_two_sided_z(level: f64) -> f64 {
    SQRT_2 * erfc_inv(1.0 - level)
}

/// ln k! for k = 0..=n.
pub fn log_factorials(n: u64) -> Vec<f64> {
    let mut out = Vec::with_capacity(n as usize + 1);
    let mut acc = 0.0;
    out.push(0.0);
    for k in 1..=n {
        acc += (k as f64).ln();
        out.push(acc);
    }
    out
}

/// Bin(n, θ) probabilities, computed in log space.
pub fn binomial_pmf(n: u64, theta: f64) -> Vec<f64> {
    let lf = log_factorials(n);
    let (lt, l1t) = (theta.ln(), (-theta).ln_1p());
    (0..=n)
        .map(|k| {
            let kf = k as f64;
            let nk = (n - k) as f64;
            let a = if k == 0 { 0.0 } else { kf * lt };
            let b = if k == n { 0.0 } else { nk * l1t };
            (lf[n as usize] - lf[k as usize] - lf[(n - k) as usize] + a + b).exp()
        })
        .collect()
}

/// P(X ≥ k) for X ~ Bin(n, θ), summed from the top.
pub fn binomial_upper_tail(n: u64, theta: f64, k: u64) -> f64 {
    if k == 0 {
        return 1.0;
    }
    if k > n {
        return 0.0;
    }
    let pmf = binomial_pmf(n, theta);
    pmf[k as usize..].iter().rev().sum()
}

/// Kullback–Leibler divergence between Bernoulli(a) and Bernoulli(θ).
pub fn bernoulli_kl(a: f64, theta: f64) -> f64 {
    let term = |x: f64, y: f64| if x == 0.0 { 0.0 } else { x * (x / y).ln() };
    term(a, theta) + term(1.0 - a, 1.0 - theta)
}

/// E[max_j |W̄_j|] for the i.i.d. two-point coordinates with values −σ²/B
/// and B.
///
/// W̄_j = c·k − σ²/B with c = (σ²+B²)/(nB) and k ~ Bin(n, σ²/(σ²+B²)).
/// With the distinct values v₀ < v₁ < … of |W̄₁| and S_i = P(|W̄₁| > v_i),
/// E[max] = v₀ + Σ_{i≥1}(v_i − v_{i−1})(1 − (1 − S_{i−1})^p).
pub fn exact_bernoulli_expected_max(inst: &BoundedInstance) -> Result<f64> {
    inst.validate()?;
    if inst.n > EXACT_MAX_N {
        return Err(Error::UnsupportedSize(format!("exact oracle supports n <= {EXACT_MAX_N}, got {}", inst.n)));
    }
    let v = inst.sigma * inst.sigma;
    let theta = v / (v + inst.b * inst.b);
    let c = (v + inst.b * inst.b) / (inst.nf() * inst.b);
    let shift = v / inst.b;
    let pmf = binomial_pmf(inst.n, theta);
    let mut atoms: Vec<(f64, f64)> = pmf
        .iter()
        .enumerate()
        .map(|(k, &w)| ((c * k as f64 - shift).abs(), w))
        .collect();
    atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
    // tail[i] = P(|W̄| ≥ v_i) accumulated from the top
    let mut tail = vec![0.0; atoms.len() + 1];
    for i in (0..atoms.len()).rev() {
        tail[i] = tail[i + 1] + atoms[i].1;
    }
    let p = inst.p as f64;
    let mut e = atoms[0].0;
    for i in 1..atoms.len() {
        let s = tail[i].min(1.0);
        let step = atoms[i].0 - atoms[i - 1].0;
        if step > 0.0 {
            e += step * -(p * (-s).ln_1p()).exp_m1();
        }
    }
    Ok(e)
}

/// (Σp_j − Σ_{i<j}p_i p_j, 1 − Π(1 − p_j), Σp_j).
pub fn inclusion_exclusion_bracket(probs: &[f64]) -> (f64, f64, f64) {
    let s1: f64 = probs.iter().sum();
    let s2: f64 = probs.iter().map(|x| x * x).sum();
    let pairs = 0.5 * (s1 * s1 - s2);
    let union = -probs.iter().map(|x| (-x).ln_1p()).sum::<f64>().exp_m1();
    (s1 - pairs, union, s1)
}

/// (px − C(p,2)x², 1 − (1 − x)^p, px).
pub fn binomial_union_bracket(x: f64, p: u64) -> (f64, f64, f64) {
    let pf = p as f64;
    (pf * x - 0.5 * pf * (pf - 1.0) * x * x, -(pf * (-x).ln_1p()).exp_m1(), pf * x)
}

/// Wilson score interval for k successes in m trials.
pub fn wilson_interval(k: u64, m: u64, z: f64) -> (f64, f64) {
    let mf = m as f64;
    let ph = k as f64 / mf;
    let z2 = z * z;
    let den = 1.0 + z2 / mf;
    let centre = (ph + z2 / (2.0 * mf)) / den;
    let half = z * (ph * (1.0 - ph) / mf + z2 / (4.0 * mf * mf)).sqrt() / den;
    let lo = if k == 0 { 0.0 } else { (centre - half).max(0.0) };
    let hi = if k == m { 1.0 } else { (centre + half).min(1.0) };
    (lo, hi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn inst(n: u64, p: u64, s: f64, b: f64) -> BoundedInstance {
        BoundedInstance::new(n, p, s, b).unwrap()
    }

    // all 2^{np} outcomes of the n×p sign pattern
    fn brute_force(n: u64, p: u64, s: f64, b: f64) -> f64 {
        let v = s * s;
        let (lo, hi) = (-v / b, b);
        let ph = v / (v + b * b);
        let cells = (n * p) as u32;
        let mut e = 0.0;
        for mask in 0u64..(1 << cells) {
            let mut prob = 1.0;
            let mut best = 0.0f64;
            for j in 0..p {
                let mut sum = 0.0;
                for i in 0..n {
                    let bit = (mask >> (j * n + i)) & 1;
                    sum += if bit == 1 { hi } else { lo };
                    prob *= if bit == 1 { ph } else { 1.0 - ph };
                }
                best = best.max((sum / n as f64).abs());
            }
            e += prob * best;
        }
        e
    }

    #[test]
    fn single_draw() {
        let (s, b) = (0.3, 1.2);
        let want = 2.0 * s * s * b / (s * s + b * b);
        assert!((exact_bernoulli_expected_max(&inst(1, 1, s, b)).unwrap() - want).abs() < 1e-15);
    }

    #[test]
    fn two_draws_symmetric() {
        assert!((exact_bernoulli_expected_max(&inst(2, 1, 1.5, 1.5)).unwrap() - 0.75).abs() < 1e-15);
    }

    #[test]
    fn matches_enumeration() {
        for &(n, p, s, b) in &[(3u64, 2u64, 0.5, 1.0), (2, 3, 0.2, 1.0), (4, 3, 1.0, 1.0), (5, 2, 0.05, 2.0), (1, 6, 0.7, 0.9)] {
            let got = exact_bernoulli_expected_max(&inst(n, p, s, b)).unwrap();
            let want = brute_force(n, p, s, b);
            assert!((got - want).abs() < 1e-13 * want.max(1e-300), "{n} {p}: {got} vs {want}");
        }
    }

    #[test]
    fn rejects_large_n() {
        assert!(matches!(exact_bernoulli_expected_max(&inst(EXACT_MAX_N + 1, 1, 1.0, 1.0)), Err(Error::UnsupportedSize(_))));
        assert!(exact_bernoulli_expected_max(&inst(EXACT_MAX_N, 1_000_000, 0.01, 1.0)).unwrap() > 0.0);
    }

    #[test]
    fn pmf_sums_to_one() {
        for &(n, t) in &[(10u64, 0.3), (10_000, 1e-6), (500, 0.5)] {
            let s: f64 = binomial_pmf(n, t).iter().sum();
            assert!((s - 1.0).abs() < 1e-11);
        }
    }

    #[test]
    fn mills_bracket() {
        let phi = |x: f64| (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
        for i in 1..=600 {
            let x = 10f64.powf(-3.0 + 4.5 * i as f64 / 600.0);
            let tail = normal_cdf(-x);
            assert!(tail <= phi(x) / x * (1.0 + 1e-12));
            assert!(tail >= phi(x) / (x + 1.0) * (1.0 - 1e-12));
        }
        assert!((normal_cdf(0.0) - 0.5).abs() < 1e-16);
        assert!((normal_two_sided_z(0.99) - 2.575_829_303_548_901).abs() < 1e-9);
    }

    #[test]
    fn wilson_contains_estimate() {
        let (lo, hi) = wilson_interval(30, 1000, 2.576);
        assert!(lo < 0.03 && 0.03 < hi);
        let (lo, hi) = wilson_interval(0, 1000, 2.576);
        assert_eq!(lo, 0.0);
        assert!(hi > 0.0 && hi < 0.01);
    }

    #[test]
    fn zubkov_serov_lower_tail() {
        for &n in &[5u64, 20, 100, 400] {
            for &theta in &[0.01, 0.1, 0.3, 0.5] {
                let start = (n as f64 * theta).ceil() as u64;
                for k in start..=n {
                    let exact = binomial_upper_tail(n, theta, k);
                    let a = k as f64 / n as f64;
                    let bound = normal_cdf(-(2.0 * n as f64 * bernoulli_kl(a, theta)).sqrt());
                    assert!(exact >= bound * (1.0 - 1e-9), "n={n} θ={theta} k={k}");
                }
            }
        }
    }

    proptest! {
        #[test]
        fn inclusion_exclusion(probs in proptest::collection::vec(0.0f64..1.0, 1..30)) {
            let (lo, mid, hi) = inclusion_exclusion_bracket(&probs);
            prop_assert!(lo <= mid + 1e-12 && mid <= hi + 1e-12);
        }

        #[test]
        fn binomial_union(x in 0.0f64..1.0, p in 1u64..1000) {
            let (lo, mid, hi) = binomial_union_bracket(x, p);
            prop_assert!(lo <= mid + 1e-12 * hi.max(1.0) && mid <= hi + 1e-12 * hi.max(1.0));
        }
    }
}
