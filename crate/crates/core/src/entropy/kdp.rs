//! Recursive k-d partitioning plug-in estimator.
//!
//! The sample's bounding box is split recursively at the data median along
//! the axis with the largest data spread. A cell becomes a leaf when
//!
//! * it holds fewer than `max(min_cell, ceil(sqrt(T)))` points, or
//! * it is at depth `>= ceil(log2(T) / 2)` and looks uniform along the split
//!   axis: `|2 sqrt(n) (median - midpoint) / width| < 1.96`, the z-score of
//!   the sample median under a uniform law on the cell, or
//! * its points share one value on every axis (nothing left to split).
//!
//! The estimate treats the density as constant on each leaf:
//! `H = sum_j (n_j / T) log(T vol_j / n_j)`.

use super::{require_samples, EntropyError, EntropyEstimate, EstimatorKind};
use crate::features::FeatureSet;

const UNIFORM_Z: f64 = 1.96;

struct Partition<'a> {
    x: &'a FeatureSet,
    stop_count: usize,
    min_depth: usize,
    ln_t: f64,
    acc: f64,
    zero_volume: bool,
}

impl Partition<'_> {
    fn leaf(&mut self, n: usize, lo: &[f64], hi: &[f64]) {
        let ln_vol: f64 = lo.iter().zip(hi).map(|(l, h)| (h - l).ln()).sum();
        if !ln_vol.is_finite() {
            self.zero_volume = true;
            return;
        }
        let n_f = n as f64;
        self.acc += n_f * (self.ln_t + ln_vol - n_f.ln());
    }

    fn split(&mut self, idx: &mut [usize], lo: &mut [f64], hi: &mut [f64], depth: usize) {
        let n = idx.len();
        if n == 0 {
            return;
        }
        if n < self.stop_count {
            return self.leaf(n, lo, hi);
        }
        let dim = self.x.dim();
        let mut axis = 0;
        let mut spread = -1.0;
        for a in 0..dim {
            let (mn, mx) = idx.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(mn, mx), &i| {
                let v = self.x.row(i)[a];
                (mn.min(v), mx.max(v))
            });
            if mx - mn > spread {
                spread = mx - mn;
                axis = a;
            }
        }
        if spread <= 0.0 {
            return self.leaf(n, lo, hi);
        }
        let x = self.x;
        idx.sort_unstable_by(|&a, &b| x.row(a)[axis].total_cmp(&x.row(b)[axis]).then(a.cmp(&b)));
        let half = n / 2;
        let median = if n % 2 == 1 {
            x.row(idx[half])[axis]
        } else {
            0.5 * (x.row(idx[half - 1])[axis] + x.row(idx[half])[axis])
        };
        if depth >= self.min_depth {
            let width = hi[axis] - lo[axis];
            let mid = 0.5 * (lo[axis] + hi[axis]);
            let z = 2.0 * (n as f64).sqrt() * (median - mid) / width;
            if z.abs() < UNIFORM_Z {
                return self.leaf(n, lo, hi);
            }
        }
        let (left, right) = idx.split_at_mut(half);
        let saved_hi = hi[axis];
        hi[axis] = median;
        self.split(left, lo, hi, depth + 1);
        hi[axis] = saved_hi;
        let saved_lo = lo[axis];
        lo[axis] = median;
        self.split(right, lo, hi, depth + 1);
        lo[axis] = saved_lo;
    }
}

/// Shannon entropy by adaptive k-d partitioning.
pub fn kdp_entropy(x: &FeatureSet, min_cell: usize) -> Result<EntropyEstimate, EntropyError> {
    require_samples(x, 2)?;
    let t_len = x.len();
    let dim = x.dim();
    let mut lo = vec![f64::INFINITY; dim];
    let mut hi = vec![f64::NEG_INFINITY; dim];
    for row in x.rows() {
        for a in 0..dim {
            lo[a] = lo[a].min(row[a]);
            hi[a] = hi[a].max(row[a]);
        }
    }
    if lo.iter().zip(&hi).any(|(l, h)| h <= l) {
        return Err(EntropyError::ZeroVolume);
    }
    let t_f = t_len as f64;
    let mut part = Partition {
        x,
        stop_count: min_cell.max(t_f.sqrt().ceil() as usize),
        min_depth: (0.5 * t_f.log2()).ceil() as usize,
        ln_t: t_f.ln(),
        acc: 0.0,
        zero_volume: false,
    };
    let mut idx: Vec<usize> = (0..t_len).collect();
    part.split(&mut idx, &mut lo, &mut hi, 0);
    if part.zero_volume {
        return Err(EntropyError::ZeroVolume);
    }
    EntropyEstimate::new(part.acc / t_f, EstimatorKind::Kdp, x, false)
}
