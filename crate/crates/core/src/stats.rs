//! Goodness-of-fit and standard-error helpers for the Monte Carlo checks.

use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};

/// Minimum expected count per bin before pooling.
const MIN_EXPECTED: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct ChiSquareResult {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
}

/// Pearson goodness-of-fit of `observed` counts against `probs`.
///
/// Adjacent bins are pooled until each has an expected count of at least 5;
/// a positive count in a bin of zero probability gives `p = 0`.
pub fn chi_square_gof(observed: &[u64], probs: &[f64]) -> Result<ChiSquareResult> {
    if observed.len() != probs.len() || observed.is_empty() {
        return Err(Error::Domain(
            "observed counts and probabilities differ in length".into(),
        ));
    }
    let n: u64 = observed.iter().sum();
    if n == 0 {
        return Err(Error::Domain("no observations".into()));
    }
    let total_p: f64 = probs.iter().sum();
    if (total_p - 1.0).abs() > 1e-8 {
        return Err(Error::Domain(format!("probabilities sum to {total_p}")));
    }
    if observed.iter().zip(probs).any(|(&o, &p)| o > 0 && p <= 0.0) {
        return Ok(ChiSquareResult {
            statistic: f64::INFINITY,
            dof: 0,
            p_value: 0.0,
        });
    }

    let mut bins: Vec<(f64, f64)> = Vec::new();
    let (mut obs, mut exp) = (0.0, 0.0);
    for (&o, &p) in observed.iter().zip(probs) {
        obs += o as f64;
        exp += p * n as f64;
        if exp >= MIN_EXPECTED {
            bins.push((obs, exp));
            obs = 0.0;
            exp = 0.0;
        }
    }
    if exp > 0.0 || obs > 0.0 {
        match bins.last_mut() {
            Some(last) => {
                last.0 += obs;
                last.1 += exp;
            }
            None => bins.push((obs, exp)),
        }
    }

    let statistic: f64 = bins.iter().map(|&(o, e)| (o - e) * (o - e) / e).sum();
    let dof = bins.len().saturating_sub(1);
    let p_value = if dof == 0 {
        1.0
    } else {
        ChiSquared::new(dof as f64)
            .map_err(|e| Error::Domain(e.to_string()))?
            .sf(statistic)
    };
    Ok(ChiSquareResult {
        statistic,
        dof,
        p_value,
    })
}

/// Sample mean and its standard error.
pub fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Empirical covariance of paired samples.
pub fn covariance(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum::<f64>() / n
}

/// Covariance with a batch-means standard error over `batches` equal blocks.
pub fn covariance_with_se(x: &[f64], y: &[f64], batches: usize) -> (f64, f64) {
    let cov = covariance(x, y);
    let size = x.len() / batches.max(1);
    if batches < 2 || size < 2 {
        return (cov, f64::NAN);
    }
    let per_batch: Vec<f64> = (0..batches)
        .map(|b| covariance(&x[b * size..(b + 1) * size], &y[b * size..(b + 1) * size]))
        .collect();
    (cov, mean_and_se(&per_batch).1)
}
