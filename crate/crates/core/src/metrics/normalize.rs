use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Raw scores at or below zero are raised to this before inversion.
pub const SCORE_FLOOR: f64 = 1e-12;

/// `q_min / q` across compared methods; the lowest raw score maps to 1.
pub fn normalize_inverse(scores: &[f64]) -> Result<Vec<f64>> {
    if scores.is_empty() {
        return Err(Error::metric("normalize_inverse", "no scores"));
    }
    if scores.iter().any(|v| !v.is_finite()) {
        return Err(Error::metric("normalize_inverse", "non-finite score"));
    }
    if scores.iter().any(|&v| v <= 0.0) {
        log::debug!("normalize_inverse: clamping non-positive scores to {SCORE_FLOOR}");
    }
    let q: Vec<f64> = scores.iter().map(|&v| v.max(SCORE_FLOOR)).collect();
    let min = q.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(q.iter().map(|&v| if v == min { 1.0 } else { min / v }).collect())
}

/// `q / q_max` across compared methods; the highest raw score maps to 1.
///
/// Negative scores are allowed. When every score is negative the row is
/// divided by `|q_max|`, so the best method sits at -1; an all-zero maximum
/// is an error.
pub fn normalize_max(scores: &[f64]) -> Result<Vec<f64>> {
    if scores.is_empty() {
        return Err(Error::metric("normalize_max", "no scores"));
    }
    if scores.iter().any(|v| !v.is_finite()) {
        return Err(Error::metric("normalize_max", "non-finite score"));
    }
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == 0.0 {
        return Err(Error::metric("normalize_max", "maximum score is zero"));
    }
    let m = max.abs();
    Ok(scores.iter().map(|&v| if v == max { max / m } else { v / m }).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub mean: f64,
    pub sem: f64,
    pub n: usize,
}

/// Mean and standard error, `s / √n` with `s` the standard deviation over
/// the `n` scores (denominator `n`).
pub fn aggregate(scores: &[f64]) -> Result<Aggregate> {
    let n = scores.len();
    if n < 2 {
        return Err(Error::InsufficientSamples { needed: 2, found: n });
    }
    let mean = scores.iter().sum::<f64>() / n as f64;
    let var = scores.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
    Ok(Aggregate {
        mean,
        sem: (var / n as f64).sqrt(),
        n,
    })
}
