//! Boxplot statistics with Tukey hinges.

use serde::{Deserialize, Serialize};

use super::BenchError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxStats {
    pub q1: f64,
    pub q2: f64,
    pub q3: f64,
    pub whisker_lo: f64,
    pub whisker_hi: f64,
    pub outliers: Vec<f64>,
}

impl BoxStats {
    /// `[q1 - 1.5 IQR, q3 + 1.5 IQR]`.
    pub fn fence(&self) -> (f64, f64) {
        let iqr = self.q3 - self.q1;
        (self.q1 - 1.5 * iqr, self.q3 + 1.5 * iqr)
    }
}

fn median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

/// Quartiles as Tukey hinges: the medians of the lower and upper halves,
/// each half including the overall median when the count is odd.
pub fn box_stats(values: &[f64]) -> Result<BoxStats, BenchError> {
    if values.is_empty() {
        return Err(BenchError::EmptyInput);
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(BenchError::Config("box statistics need finite values".into()));
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    let q1 = median(&v[..n.div_ceil(2)]);
    let q2 = median(&v);
    let q3 = median(&v[n / 2..]);
    let iqr = q3 - q1;
    let (lo, hi) = (q1 - 1.5 * iqr, q3 + 1.5 * iqr);
    let mut inside = v.iter().copied().filter(|&x| x >= lo && x <= hi);
    let whisker_lo = inside.next().unwrap_or(q1);
    let whisker_hi = inside.next_back().unwrap_or(whisker_lo);
    let outliers = v.iter().copied().filter(|&x| x < lo || x > hi).collect();
    Ok(BoxStats { q1, q2, q3, whisker_lo, whisker_hi, outliers })
}
