//! Batch-means estimates over a [`SampleSet`].

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::SampleSet;
use crate::canonical::PhasePoint;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
}

impl Estimate {
    pub fn exact(mean: f64) -> Self {
        Self { mean, stderr: 0.0 }
    }

    /// `|mean − target| / stderr`, zero when both vanish.
    pub fn z_score(&self, target: f64) -> f64 {
        let d = (self.mean - target).abs();
        if d == 0.0 {
            0.0
        } else {
            d / self.stderr
        }
    }

    /// `a·self + b·other` treating the two as independent.
    pub fn combine(&self, a: f64, other: &Estimate, b: f64) -> Estimate {
        Estimate {
            mean: a * self.mean + b * other.mean,
            stderr: ((a * self.stderr).powi(2) + (b * other.stderr).powi(2)).sqrt(),
        }
    }
}

/// Mean of a state functional with a batch-means standard error.
pub fn estimate<F>(observable: F, s: &SampleSet) -> Result<Estimate>
where
    F: Fn(&PhasePoint) -> f64 + Sync,
{
    if s.is_empty() {
        return Err(Error::EmptySampleSet);
    }
    let values: Vec<f64> = s.states.par_iter().map(&observable).collect();
    estimate_values(&values, s.chain_len, s.batches_per_chain)
}

/// Batches of equal size per chain; any remainder at the start of a chain is dropped
/// from the error estimate but kept in the mean.
fn batch_ranges(total: usize, chain_len: usize, batches_per_chain: usize) -> Result<Vec<(usize, usize)>> {
    if total == 0 {
        return Err(Error::EmptySampleSet);
    }
    if chain_len == 0 || total % chain_len != 0 || batches_per_chain == 0 || batches_per_chain > chain_len {
        return Err(Error::InvalidParameter(format!(
            "{total} values do not split into chains of {chain_len} with {batches_per_chain} batches"
        )));
    }
    let size = chain_len / batches_per_chain;
    let skip = chain_len - size * batches_per_chain;
    let mut out = Vec::new();
    for c in 0..total / chain_len {
        let start = c * chain_len + skip;
        for b in 0..batches_per_chain {
            out.push((start + b * size, start + (b + 1) * size));
        }
    }
    Ok(out)
}

pub fn estimate_values(values: &[f64], chain_len: usize, batches_per_chain: usize) -> Result<Estimate> {
    let ranges = batch_ranges(values.len(), chain_len, batches_per_chain)?;
    // shifted sums keep constant inputs exact
    let shifted_mean = |v: &[f64]| v[0] + v.iter().map(|x| x - v[0]).sum::<f64>() / v.len() as f64;
    let mean = shifted_mean(values);
    let means: Vec<f64> = ranges.iter().map(|&(a, b)| shifted_mean(&values[a..b])).collect();
    let k = means.len();
    let stderr = if k < 2 {
        // a single batch: fall back to the independent-sample formula
        let n = values.len() as f64;
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0) / n).sqrt()
    } else {
        let bm = shifted_mean(&means);
        (means.iter().map(|m| (m - bm).powi(2)).sum::<f64>() / (k as f64 - 1.0) / k as f64).sqrt()
    };
    if !mean.is_finite() || !stderr.is_finite() {
        return Err(Error::NonFinite { context: "estimate".into() });
    }
    Ok(Estimate { mean, stderr })
}

/// Delete-one-batch jackknife for `stat(means of columns)`.
pub fn jackknife<F>(columns: &[&[f64]], chain_len: usize, batches_per_chain: usize, stat: F) -> Result<Estimate>
where
    F: Fn(&[f64]) -> f64,
{
    let total = columns.first().map_or(0, |c| c.len());
    if columns.iter().any(|c| c.len() != total) {
        return Err(Error::LengthMismatch { expected: total, got: columns.iter().map(|c| c.len()).find(|&l| l != total).unwrap_or(0) });
    }
    let ranges = batch_ranges(total, chain_len, batches_per_chain)?;
    let k = ranges.len();
    let sums: Vec<Vec<f64>> =
        ranges.iter().map(|&(a, b)| columns.iter().map(|c| c[a..b].iter().sum::<f64>()).collect()).collect();
    let used: usize = ranges.iter().map(|&(a, b)| b - a).sum();
    let full_means: Vec<f64> = columns.iter().map(|c| c.iter().sum::<f64>() / total as f64).collect();
    let mean = stat(&full_means);
    let stderr = if k < 2 {
        0.0
    } else {
        let totals: Vec<f64> = (0..columns.len()).map(|j| sums.iter().map(|s| s[j]).sum()).collect();
        let thetas: Vec<f64> = sums
            .iter()
            .zip(&ranges)
            .map(|(s, &(a, b))| {
                let m = (used - (b - a)) as f64;
                let means: Vec<f64> = totals.iter().zip(s).map(|(t, x)| (t - x) / m).collect();
                stat(&means)
            })
            .collect();
        let tm = thetas.iter().sum::<f64>() / k as f64;
        ((k as f64 - 1.0) / k as f64 * thetas.iter().map(|t| (t - tm).powi(2)).sum::<f64>()).sqrt()
    };
    if !mean.is_finite() || !stderr.is_finite() {
        return Err(Error::NonFinite { context: "jackknife estimate".into() });
    }
    Ok(Estimate { mean, stderr })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_values_have_zero_error() {
        let v = vec![0.1; 1000];
        let e = estimate_values(&v, 250, 10).unwrap();
        assert_eq!(e.mean, 0.1);
        assert_eq!(e.stderr, 0.0);
    }

    #[test]
    fn empty_is_an_error() {
        assert_eq!(estimate_values(&[], 10, 2), Err(Error::EmptySampleSet));
    }

    #[test]
    fn iid_error_matches_textbook() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
        let v: Vec<f64> = (0..20000).map(|_| rng.random_range(-1.0..1.0)).collect();
        let e = estimate_values(&v, 5000, 25).unwrap();
        // uniform on [−1, 1] has variance 1/3
        let expected = (1.0f64 / 3.0 / 20000.0).sqrt();
        assert!((e.stderr / expected - 1.0).abs() < 0.25, "{} vs {expected}", e.stderr);
        assert!(e.mean.abs() < 4.0 * expected);
    }

    #[test]
    fn jackknife_of_a_mean_is_batch_means() {
        let v: Vec<f64> = (0..400).map(|i| ((i * 37) % 11) as f64).collect();
        let a = estimate_values(&v, 200, 5).unwrap();
        let b = jackknife(&[&v], 200, 5, |m| m[0]).unwrap();
        assert!((a.mean - b.mean).abs() < 1e-12);
        assert!((a.stderr - b.stderr).abs() < 1e-12);
    }

    #[test]
    fn z_score_handles_zero() {
        assert_eq!(Estimate::exact(1.0).z_score(1.0), 0.0);
        assert!(Estimate::exact(1.0).z_score(2.0).is_infinite());
    }
}
