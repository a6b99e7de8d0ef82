//! Exact paired sign-flip permutation test over per-fold scores.

use crate::error::{Error, Result};

/// Largest number of pairs enumerated exactly (2^26 sign patterns).
pub const MAX_EXACT_PAIRS: usize = 26;

/// Two-sided p-value: the fraction of the 2^n sign assignments of the paired
/// differences whose absolute sum is at least the observed one.
pub fn significance(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::dim("paired samples", a.len(), b.len()));
    }
    let n = a.len();
    if n < 2 {
        return Err(Error::Data("permutation test needs at least two pairs".into()));
    }
    if n > MAX_EXACT_PAIRS {
        return Err(Error::Data(format!(
            "exact permutation test supports at most {MAX_EXACT_PAIRS} pairs, got {n}"
        )));
    }
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    if diffs.iter().any(|d| !d.is_finite()) {
        return Err(Error::Data("non-finite score in permutation test".into()));
    }
    let observed: f64 = diffs.iter().sum::<f64>().abs();
    let scale: f64 = diffs.iter().map(|d| d.abs()).sum();
    let tol = 1e-12 * scale.max(f64::MIN_POSITIVE);

    // Walk all sign patterns in Gray-code order, flipping one sign per step.
    let mut signs = vec![1.0; n];
    let mut sum: f64 = diffs.iter().sum();
    let total: u64 = 1 << n;
    let mut hits: u64 = 0;
    for step in 0..total {
        if step > 0 {
            let bit = step.trailing_zeros() as usize;
            sum -= 2.0 * signs[bit] * diffs[bit];
            signs[bit] = -signs[bit];
        }
        if sum.abs() >= observed - tol {
            hits += 1;
        }
    }
    Ok(hits as f64 / total as f64)
}
