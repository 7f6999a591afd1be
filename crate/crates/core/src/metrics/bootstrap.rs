use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::{Error, Result};

/// Linearly interpolated quantile of sorted data (the numpy default).
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty());
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

/// Percentile bootstrap interval for the mean of `values`.
pub fn bootstrap_ci(values: &[f64], lo: f64, hi: f64, n_resamples: usize, seed: u64) -> Result<(f64, f64)> {
    if values.is_empty() {
        return Err(Error::Validation("bootstrap of an empty sample".into()));
    }
    if n_resamples == 0 {
        return Err(Error::Validation("bootstrap needs at least one resample".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = values.len();
    let mut means: Vec<f64> = (0..n_resamples)
        .map(|_| (0..n).map(|_| values[rng.gen_range(0..n)]).sum::<f64>() / n as f64)
        .collect();
    means.sort_by(f64::total_cmp);
    Ok((quantile(&means, lo), quantile(&means, hi)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_sample_has_degenerate_interval() {
        let (lo, hi) = bootstrap_ci(&[0.5; 20], 0.1, 0.9, 1000, 1).unwrap();
        assert_eq!((lo, hi), (0.5, 0.5));
    }

    #[test]
    fn interval_brackets_the_mean() {
        let values: Vec<f64> = (0..40).map(|i| ((i * 37) % 11) as f64 / 10.0).collect();
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        let (lo, hi) = bootstrap_ci(&values, 0.1, 0.9, 2000, 7).unwrap();
        assert!(lo <= mean && mean <= hi);
        assert_eq!(bootstrap_ci(&values, 0.1, 0.9, 2000, 7).unwrap(), (lo, hi));
    }

    #[test]
    fn empty_sample_is_rejected() {
        assert!(bootstrap_ci(&[], 0.1, 0.9, 1000, 0).is_err());
    }

    #[test]
    fn quantile_interpolates() {
        assert_eq!(quantile(&[0.0, 1.0, 2.0, 3.0], 0.5), 1.5);
        assert_eq!(quantile(&[4.0], 0.9), 4.0);
    }
}
