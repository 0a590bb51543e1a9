//! Chunked Monte Carlo engine whose output does not depend on the number of
//! worker threads.
//!
//! Replications are grouped into fixed chunks of [`CHUNK_REPS`]. Chunk c
//! draws from the stream (derived seed, c), where the derived seed is the
//! first word of the caller's stream. Per-replication values are gathered
//! in index order and reduced on one thread.

use rand::RngCore;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::exact::{normal_two_sided_z, wilson_interval};
use crate::dist::{DistSpec, RngStream};
use crate::error::{Error, Result};

/// Replications per chunk.
pub const CHUNK_REPS: u64 = 512;
/// Minimum replications for expectation estimates.
pub const MIN_REPS_MEAN: u64 = 100;
/// Minimum replications for tail frequencies.
pub const MIN_REPS_TAIL: u64 = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimateResult {
    pub mean: f64,
    pub std_error: f64,
    pub reps: u64,
    pub seed: u64,
}

/// Tail frequency with its Wilson 99% interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailEstimate {
    pub threshold: f64,
    pub freq: f64,
    pub count: u64,
    pub reps: u64,
    pub ci_low: f64,
    pub ci_high: f64,
}

impl TailEstimate {
    /// √(f(1−f)/m) at the observed frequency.
    pub fn std_error(&self) -> f64 {
        (self.freq * (1.0 - self.freq) / self.reps as f64).sqrt()
    }
}

/// Runs `reps` replications of `one` and returns their values in order.
///
/// `one` receives the chunk generator and a scratch buffer that persists
/// within a chunk.
pub fn replicate<F>(reps: u64, rng: RngStream, workers: usize, one: F) -> Result<Vec<f64>>
where
    F: Fn(&mut ChaCha8Rng, &mut Vec<f64>) -> Result<f64> + Sync,
{
    let base = rng.rng().next_u64();
    let chunks = reps.div_ceil(CHUNK_REPS);
    let run_chunk = |c: u64| -> Result<Vec<f64>> {
        let mut r = RngStream::new(base, c).rng();
        let len = CHUNK_REPS.min(reps - c * CHUNK_REPS);
        let mut scratch = Vec::new();
        (0..len).map(|_| one(&mut r, &mut scratch)).collect()
    };
    let parts: Result<Vec<Vec<f64>>> = if workers <= 1 {
        (0..chunks).map(run_chunk).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| Error::InvalidInstance(format!("thread pool: {e}")))?;
        pool.install(|| (0..chunks).into_par_iter().map(run_chunk).collect())
    };
    Ok(parts?.into_iter().flatten().collect())
}

/// Mean and standard error, reduced sequentially.
pub fn summarize(values: &[f64], seed: u64) -> EstimateResult {
    let m = values.len() as f64;
    let mean = values.iter().sum::<f64>() / m;
    let var = if values.len() > 1 {
        values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (m - 1.0)
    } else {
        0.0
    };
    EstimateResult {
        mean,
        std_error: (var / m).sqrt(),
        reps: values.len() as u64,
        seed,
    }
}

fn check_reps(reps: u64, min: u64, routine: &'static str) -> Result<()> {
    if reps < min {
        return Err(Error::Domain {
            routine,
            value: reps as f64,
            expected: "enough replications",
        });
    }
    Ok(())
}

fn dimension(spec: &DistSpec, p: u64) -> Result<u64> {
    match spec.fixed_dim() {
        Some(d) if d != p => Err(Error::InvalidInstance(format!("law has dimension {d}, requested {p}"))),
        _ if p == 0 => Err(Error::InvalidInstance("p must be at least 1".into())),
        _ => Ok(p),
    }
}

/// max_j |(1/n)Σᵢ Xᵢ(j)| for one replication.
pub fn max_abs_mean<R: RngCore + ?Sized>(spec: &DistSpec, n: u64, p: u64, rng: &mut R, scratch: &mut Vec<f64>) -> Result<f64> {
    let p = p as usize;
    scratch.resize(2 * p, 0.0);
    let (sum, row) = scratch.split_at_mut(p);
    sum.fill(0.0);
    for _ in 0..n {
        spec.sample_into(rng, row)?;
        for (s, x) in sum.iter_mut().zip(row.iter()) {
            *s += x;
        }
    }
    let nf = n as f64;
    Ok(sum.iter().fold(0.0f64, |m, s| m.max((s / nf).abs())))
}

/// Monte Carlo estimate of E max_j |(1/n)Σᵢ Xᵢ(j)|.
pub fn estimate_expected_max(spec: &DistSpec, n: u64, p: u64, reps: u64, rng: RngStream, workers: usize) -> Result<EstimateResult> {
    spec.validate()?;
    check_reps(reps, MIN_REPS_MEAN, "estimate_expected_max")?;
    let p = dimension(spec, p)?;
    if n == 0 {
        return Err(Error::InvalidInstance("n must be at least 1".into()));
    }
    let values = replicate(reps, rng, workers, |r, s| max_abs_mean(spec, n, p, r, s))?;
    Ok(summarize(&values, rng.seed))
}

/// `reps` draws of (1/n)Σᵢ Xᵢ(1).
pub fn sample_means(spec: &DistSpec, n: u64, reps: u64, rng: RngStream, workers: usize) -> Result<Vec<f64>> {
    spec.validate()?;
    if n == 0 {
        return Err(Error::InvalidInstance("n must be at least 1".into()));
    }
    let dim = spec.fixed_dim().unwrap_or(1) as usize;
    let nf = n as f64;
    replicate(reps, rng, workers, |r, buf| {
        buf.resize(dim, 0.0);
        let mut s = 0.0;
        for _ in 0..n {
            spec.sample_into(r, buf)?;
            s += buf[0];
        }
        Ok(s / nf)
    })
}

/// Frequency of {mean ≥ t} with its Wilson 99% interval.
pub fn tail_from_means(means: &[f64], threshold: f64) -> TailEstimate {
    let reps = means.len() as u64;
    let count = means.iter().filter(|&&m| m >= threshold).count() as u64;
    let (ci_low, ci_high) = wilson_interval(count, reps, normal_two_sided_z(0.99));
    TailEstimate {
        threshold,
        freq: count as f64 / reps as f64,
        count,
        reps,
        ci_low,
        ci_high,
    }
}

/// Frequency of {(1/n)Σᵢ Xᵢ(1) ≥ threshold}.
pub fn empirical_tail(spec: &DistSpec, n: u64, threshold: f64, reps: u64, rng: RngStream, workers: usize) -> Result<TailEstimate> {
    Ok(empirical_tails(spec, n, &[threshold], reps, rng, workers)?.remove(0))
}

/// Several thresholds evaluated on one set of replications.
pub fn empirical_tails(spec: &DistSpec, n: u64, thresholds: &[f64], reps: u64, rng: RngStream, workers: usize) -> Result<Vec<TailEstimate>> {
    check_reps(reps, MIN_REPS_TAIL, "empirical_tail")?;
    let means = sample_means(spec, n, reps, rng, workers)?;
    Ok(thresholds.iter().map(|&t| tail_from_means(&means, t)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bounded::BoundedInstance;
    use crate::lab::exact::exact_bernoulli_expected_max;

    #[test]
    fn point_mass_zero() {
        let spec = DistSpec::TwoPoint { tau: 0.0, k: 1.0 };
        let e = estimate_expected_max(&spec, 7, 3, 1000, RngStream::new(1, 0), 2).unwrap();
        assert_eq!((e.mean, e.std_error, e.reps), (0.0, 0.0, 1000));
    }

    #[test]
    fn worker_count_does_not_matter() {
        let spec = DistSpec::HeavyTailG { q: 3.0 };
        let run = |w| estimate_expected_max(&spec, 5, 4, 3000, RngStream::new(99, 4), w).unwrap();
        let a = run(1);
        assert_eq!(a, run(4));
        assert_eq!(a, run(8));
        assert_ne!(a, estimate_expected_max(&spec, 5, 4, 3000, RngStream::new(98, 4), 1).unwrap());
    }

    #[test]
    fn agrees_with_exact_oracle() {
        let inst = BoundedInstance::new(3, 2, 0.5, 1.0).unwrap();
        let spec = DistSpec::BernoulliWorst { sigma: 0.5, b: 1.0 };
        let e = estimate_expected_max(&spec, 3, 2, 1_000_000, RngStream::new(2024, 0), 4).unwrap();
        let exact = exact_bernoulli_expected_max(&inst).unwrap();
        assert!((e.mean - exact).abs() <= 4.0 * e.std_error, "{} ± {} vs {exact}", e.mean, e.std_error);
    }

    #[test]
    fn se_scales_with_reps() {
        let spec = DistSpec::BernoulliWorst { sigma: 1.0, b: 1.0 };
        let a = estimate_expected_max(&spec, 4, 3, 20_000, RngStream::new(5, 0), 4).unwrap();
        let b = estimate_expected_max(&spec, 4, 3, 80_000, RngStream::new(5, 1), 4).unwrap();
        let r = a.std_error / b.std_error;
        assert!((r / 2.0 - 1.0).abs() <= 0.2, "ratio {r}");
    }

    #[test]
    fn rejects_small_reps() {
        let spec = DistSpec::HeavyTailG { q: 3.0 };
        assert!(estimate_expected_max(&spec, 2, 1, 99, RngStream::new(1, 0), 1).is_err());
        assert!(empirical_tail(&spec, 2, 0.0, 9_999, RngStream::new(1, 0), 1).is_err());
    }

    #[test]
    fn infinite_threshold() {
        let spec = DistSpec::HeavyTailG { q: 2.5 };
        let t = empirical_tail(&spec, 3, f64::INFINITY, 10_000, RngStream::new(3, 0), 2).unwrap();
        assert_eq!(t.count, 0);
    }

    #[test]
    fn sign_symmetry_at_zero() {
        let spec = DistSpec::HeavyTailG { q: 3.0 };
        let means = sample_means(&spec, 4, 20_000, RngStream::new(8, 0), 2).unwrap();
        let up = tail_from_means(&means, 0.0).freq;
        let neg: Vec<f64> = means.iter().map(|m| -m).collect();
        let down = tail_from_means(&neg, 0.0).freq;
        assert!(up + down >= 1.0);
        assert!((up - down).abs() < 4.0 * (0.5 / 20_000f64).sqrt() * 2.0);
    }

    #[test]
    fn partial_last_chunk() {
        let v = replicate(CHUNK_REPS + 3, RngStream::new(1, 1), 3, |r, _| Ok(r.next_u32() as f64)).unwrap();
        assert_eq!(v.len() as u64, CHUNK_REPS + 3);
    }
}
