//! Euclidean minimum spanning tree and the MST Rényi entropy estimator.

use super::calibration::constant_for;
use super::nn::quasi_additive_offset;
use super::{require_samples, sq_dist, EntropyError, EntropyEstimate, EstimatorKind, EstimatorSpec};
use crate::features::FeatureSet;

/// One tree edge `(i, j, length)`.
pub type Edge = (usize, usize, f64);

/// Euclidean MST by dense Prim, `O(T^2)` time and `O(T)` memory.
pub fn euclidean_mst(x: &FeatureSet) -> Result<Vec<Edge>, EntropyError> {
    require_samples(x, 2)?;
    let n = x.len();
    let mut in_tree = vec![false; n];
    let mut best = vec![f64::INFINITY; n];
    let mut parent = vec![0usize; n];
    let mut edges = Vec::with_capacity(n - 1);
    let mut current = 0;
    in_tree[0] = true;
    for _ in 1..n {
        let p = x.row(current);
        let mut next = usize::MAX;
        let mut next_d = f64::INFINITY;
        for j in 0..n {
            if in_tree[j] {
                continue;
            }
            let d2 = sq_dist(p, x.row(j));
            if d2 < best[j] {
                best[j] = d2;
                parent[j] = current;
            }
            if best[j] < next_d || next == usize::MAX {
                next_d = best[j];
                next = j;
            }
        }
        in_tree[next] = true;
        edges.push((parent[next], next, next_d.sqrt()));
        current = next;
    }
    Ok(edges)
}

/// `sum_edges |e|^p` over the Euclidean MST.
pub fn mst_length(x: &FeatureSet, p: f64) -> Result<f64, EntropyError> {
    Ok(euclidean_mst(x)?
        .iter()
        .map(|&(_, _, len)| if len == 0.0 { 0.0 } else { len.powf(p) })
        .sum())
}

/// Rényi entropy from the MST length functional with `p = d(1-alpha)`:
/// `1/(1-a) log(L / (beta T^a))`. `beta` is 1 unless `spec.calibrate`.
pub fn renyi_mst(x: &FeatureSet, spec: &EstimatorSpec) -> Result<EntropyEstimate, EntropyError> {
    if !(spec.alpha > 0.0 && spec.alpha < 1.0) {
        return Err(EntropyError::AlphaInvalid(spec.alpha));
    }
    require_samples(x, 2)?;
    let length = mst_length(x, x.dim() as f64 * (1.0 - spec.alpha))?;
    if length <= 0.0 {
        return Err(EntropyError::DegenerateSample("all samples coincide".into()));
    }
    let beta = constant_for(spec, x.dim(), x.len())?;
    let h = (length / x.len() as f64).ln() / (1.0 - spec.alpha) + quasi_additive_offset(spec, x.len(), beta);
    EntropyEstimate::new(h, EstimatorKind::Mst, x, spec.calibrate)
}
