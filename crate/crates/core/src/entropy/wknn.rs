//! Weighted combination of Kozachenko–Leonenko estimators over a range of k.
//!
//! The weights solve
//!
//! ```text
//! minimize    sum_k w_k^2
//! subject to  sum_k w_k = 1
//!             sum_k w_k Gamma(k + i/d) / Gamma(k) = 0,  i = 1..=min(floor(d/2), k_max - k_min - 1)
//! ```
//!
//! The bias of the kth-neighbor estimator expands in powers `(k/T)^(i/d)`;
//! the second family of constraints cancels the leading terms. The
//! minimum-norm solution is `w = A^T (A A^T)^-1 e_1`.

use nalgebra::{DMatrix, DVector};

use super::knn::knn_table;
use super::nn::shannon_from_table;
use super::special::ln_gamma;
use super::{require_samples, EntropyError, EntropyEstimate, EstimatorKind, EstimatorSpec};
use crate::features::FeatureSet;

#[derive(Debug, Clone, PartialEq)]
pub struct WknnWeights {
    pub k_min: usize,
    pub k_max: usize,
    /// `weights[i]` multiplies the estimate with `k = k_min + i`.
    pub weights: Vec<f64>,
    /// Set when the constrained system was singular and uniform weights were used.
    pub fallback: bool,
}

impl WknnWeights {
    pub fn ks(&self) -> impl Iterator<Item = usize> {
        self.k_min..=self.k_max
    }
}

/// Number of bias-cancelling constraints for a range and dimension.
pub fn bias_constraints(k_min: usize, k_max: usize, d: usize) -> usize {
    (d / 2).min(k_max - k_min - 1)
}

fn uniform(k_min: usize, k_max: usize) -> Vec<f64> {
    let n = k_max - k_min + 1;
    vec![1.0 / n as f64; n]
}

/// Bias-cancelling minimum-norm weights for `k in k_min..=k_max`.
pub fn solve_wknn_weights(k_min: usize, k_max: usize, d: usize) -> Result<WknnWeights, EntropyError> {
    if k_min == 0 || k_max <= k_min || d == 0 {
        return Err(EntropyError::InvalidRange(k_min, k_max));
    }
    let n = k_max - k_min + 1;
    let m = 1 + bias_constraints(k_min, k_max, d);
    let a = DMatrix::from_fn(m, n, |row, col| {
        if row == 0 {
            1.0
        } else {
            let k = (k_min + col) as f64;
            (ln_gamma(k + row as f64 / d as f64) - ln_gamma(k)).exp()
        }
    });
    let mut b = DVector::zeros(m);
    b[0] = 1.0;

    let solved = (&a * a.transpose()).lu().solve(&b).map(|y| a.transpose() * y);
    match solved {
        Some(w) if w.iter().all(|v| v.is_finite()) && (&a * &w - &b).amax() < 1e-8 => {
            // put the rounding error of the sum constraint back on the largest weight
            let mut weights: Vec<f64> = w.iter().copied().collect();
            let err = 1.0 - weights.iter().sum::<f64>();
            let imax = (0..n).max_by(|&i, &j| weights[i].abs().total_cmp(&weights[j].abs())).unwrap_or(0);
            weights[imax] += err;
            Ok(WknnWeights { k_min, k_max, weights, fallback: false })
        }
        _ => Ok(WknnWeights { k_min, k_max, weights: uniform(k_min, k_max), fallback: true }),
    }
}

/// `sum_k w_k * H_KL(x, k)` for explicit weights over `k_min..=k_min+len-1`.
pub fn weighted_knn(x: &FeatureSet, k_min: usize, weights: &[f64], use_kdtree: bool) -> Result<f64, EntropyError> {
    if k_min == 0 || weights.is_empty() {
        return Err(EntropyError::InvalidRange(k_min, k_min + weights.len()));
    }
    let k_max = k_min + weights.len() - 1;
    require_samples(x, k_max + 1)?;
    let table = knn_table(x, k_max, use_kdtree)?;
    let mut h = 0.0;
    for (i, &w) in weights.iter().enumerate() {
        h += w * shannon_from_table(&table, k_min + i, x.dim())?;
    }
    Ok(h)
}

/// Shannon entropy as the bias-cancelling weighted sum of kth-neighbor estimates.
pub fn shannon_wknn(x: &FeatureSet, spec: &EstimatorSpec) -> Result<EntropyEstimate, EntropyError> {
    let (k_min, k_max) = spec.wknn_range;
    let w = solve_wknn_weights(k_min, k_max, x.dim())?;
    let h = weighted_knn(x, k_min, &w.weights, spec.use_kdtree)?;
    EntropyEstimate::new(h, EstimatorKind::Wknn, x, false)
}
