//! Nearest-neighbor estimators: Kozachenko–Leonenko (Shannon), the
//! Leonenko–Pronzato–Savani kth-neighbor Rényi estimator (`knn_k`) and the
//! generalized kNN-graph functional over a neighbor set `S` (`knn_1k`).

use super::calibration::constant_for;
use super::knn::{knn_table, KnnTable};
use super::special::{digamma, ln_gamma, ln_unit_ball_volume};
use super::{require_samples, EntropyError, EntropyEstimate, EstimatorKind, EstimatorSpec};
use crate::features::FeatureSet;

/// Kozachenko–Leonenko from a precomputed table using the `k`th column.
pub(crate) fn shannon_from_table(table: &KnnTable, k: usize, d: usize) -> Result<f64, EntropyError> {
    let t_len = table.len();
    let mut sum_log = 0.0;
    for t in 0..t_len {
        let eps = table.nth(t, k);
        if eps <= 0.0 {
            return Err(EntropyError::DegenerateSample(format!(
                "sample {t} has a zero {k}-th neighbor distance (duplicate rows)"
            )));
        }
        sum_log += eps.ln();
    }
    let tf = t_len as f64;
    Ok(digamma(tf) - digamma(k as f64) + ln_unit_ball_volume(d) + d as f64 / tf * sum_log)
}

/// Shannon entropy with the Kozachenko–Leonenko kth-neighbor estimator:
/// `psi(T) - psi(k) + log V_d + (d/T) sum_t log eps_k(t)`.
pub fn shannon_knn(x: &FeatureSet, k: usize) -> Result<EntropyEstimate, EntropyError> {
    shannon_knn_with(x, k, false)
}

pub(crate) fn shannon_knn_with(x: &FeatureSet, k: usize, use_kdtree: bool) -> Result<EntropyEstimate, EntropyError> {
    let table = knn_table(x, k, use_kdtree)?;
    let h = shannon_from_table(&table, k, x.dim())?;
    EntropyEstimate::new(h, EstimatorKind::KnnK, x, false)
}

fn check_alpha_any(alpha: f64) -> Result<(), EntropyError> {
    if !alpha.is_finite() || alpha <= 0.0 || alpha == 1.0 {
        Err(EntropyError::AlphaInvalid(alpha))
    } else {
        Ok(())
    }
}

fn check_alpha_unit(alpha: f64) -> Result<(), EntropyError> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(EntropyError::AlphaInvalid(alpha))
    }
}

/// Numerically stable `log((1/n) sum exp(v_i))`.
fn log_mean_exp(values: &[f64]) -> f64 {
    let m = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    let s: f64 = values.iter().map(|v| (v - m).exp()).sum();
    m + (s / values.len() as f64).ln()
}

/// Rényi entropy of order `alpha` from kth-neighbor distances:
/// `1/(1-a) log[(1/T) sum_t ((T-1) C_k V_d eps_k(t)^d)^(1-a)]` with
/// `C_k = [Gamma(k) / Gamma(k+1-a)]^(1/(1-a))`.
pub fn renyi_knn(x: &FeatureSet, spec: &EstimatorSpec) -> Result<EntropyEstimate, EntropyError> {
    let (k, alpha) = (spec.k, spec.alpha);
    check_alpha_any(alpha)?;
    if k as f64 + 1.0 - alpha <= 0.0 {
        return Err(EntropyError::AlphaInvalid(alpha));
    }
    require_samples(x, k + 1)?;
    let table = knn_table(x, k, spec.use_kdtree)?;
    let d = x.dim() as f64;
    let one_minus = 1.0 - alpha;
    let ln_ck = (ln_gamma(k as f64) - ln_gamma(k as f64 + one_minus)) / one_minus;
    let base = ((x.len() - 1) as f64).ln() + ln_ck + ln_unit_ball_volume(x.dim());
    let mut terms = Vec::with_capacity(x.len());
    for t in 0..x.len() {
        let eps = table.nth(t, k);
        if eps <= 0.0 {
            return Err(EntropyError::DegenerateSample(format!("sample {t} has a zero {k}-th neighbor distance")));
        }
        terms.push(one_minus * (base + d * eps.ln()));
    }
    EntropyEstimate::new(log_mean_exp(&terms) / one_minus, EstimatorKind::KnnK, x, false)
}

/// Quasi-additive length `L = sum_t sum_{j in S} eps_j(t)^p`, `p = d(1-alpha)`.
pub(crate) fn knn_graph_length(x: &FeatureSet, spec: &EstimatorSpec) -> Result<f64, EntropyError> {
    let k_max = spec.neighbor_set.iter().copied().max().unwrap_or(spec.k);
    let table = knn_table(x, k_max, spec.use_kdtree)?;
    let p = x.dim() as f64 * (1.0 - spec.alpha);
    let mut total = 0.0;
    for t in 0..x.len() {
        for &j in &spec.neighbor_set {
            let eps = table.nth(t, j);
            if eps <= 0.0 {
                return Err(EntropyError::DegenerateSample(format!(
                    "sample {t} has a zero {j}-th neighbor distance"
                )));
            }
            total += eps.powf(p);
        }
    }
    Ok(total)
}

/// Rényi entropy from the kNN-graph functional over neighbor set `S`:
/// `1/(1-a) log(L / (gamma T^a))`. `gamma` is 1 unless `spec.calibrate`.
pub fn renyi_knn_graph(x: &FeatureSet, spec: &EstimatorSpec) -> Result<EntropyEstimate, EntropyError> {
    check_alpha_unit(spec.alpha)?;
    spec.validate()?;
    require_samples(x, spec.min_samples())?;
    let length = knn_graph_length(x, spec)?;
    let gamma = constant_for(spec, x.dim(), x.len())?;
    let h = (length / x.len() as f64).ln() / (1.0 - spec.alpha) + quasi_additive_offset(spec, x.len(), gamma);
    EntropyEstimate::new(h, EstimatorKind::Knn1k, x, spec.calibrate)
}

/// `1/(1-a) log(T^(1-a) / gamma)`, the part of the quasi-additive estimate
/// beyond the per-sample mean length. Writing it this way keeps
/// `log(L / (gamma T^a))` accurate for large `T`.
pub(crate) fn quasi_additive_offset(spec: &EstimatorSpec, t_len: usize, gamma: f64) -> f64 {
    let one_minus = 1.0 - spec.alpha;
    ((t_len as f64).ln() * one_minus - gamma.ln()) / one_minus
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::entropy::testdata::{normal, uniform};

    const HALF_LOG_2PI_E: f64 = 1.418_938_533_204_672_7;

    fn knn_spec() -> EstimatorSpec {
        EstimatorSpec::new(EstimatorKind::KnnK)
    }

    #[test]
    fn shannon_uniform_and_normal_1d() {
        let u = shannon_knn(&uniform(5000, 1, 1), 5).unwrap().value;
        assert!(u.abs() < 0.05, "{u}");
        let n = shannon_knn(&normal(5000, 1, 2), 5).unwrap().value;
        assert!((n - HALF_LOG_2PI_E).abs() < 0.05, "{n}");
    }

    #[test]
    fn shannon_duplicate_row_is_degenerate() {
        let mut rows: Vec<Vec<f64>> = normal(20, 2, 3).rows().map(|r| r.to_vec()).collect();
        rows.push(rows[4].clone());
        let x = FeatureSet::from_rows(&rows).unwrap();
        assert!(matches!(shannon_knn(&x, 1), Err(EntropyError::DegenerateSample(_))));
        // k beyond the duplicate is fine
        assert!(shannon_knn(&x, 2).is_ok());
    }

    #[test]
    fn renyi_uniform_square_is_zero() {
        let h = renyi_knn(&uniform(5000, 2, 4), &knn_spec()).unwrap().value;
        assert!(h.abs() < 0.07, "{h}");
    }

    #[test]
    fn renyi_near_one_matches_shannon() {
        let x = normal(5000, 2, 5);
        let r = renyi_knn(&x, &knn_spec().with_alpha(0.999)).unwrap().value;
        let s = shannon_knn(&x, 5).unwrap().value;
        assert!((r - s).abs() <= 0.05, "{r} vs {s}");
    }

    #[test]
    fn renyi_scale_law() {
        let x = normal(5000, 2, 6);
        let h1 = renyi_knn(&x, &knn_spec()).unwrap().value;
        let h2 = renyi_knn(&x.map(|v| 2.0 * v), &knn_spec()).unwrap().value;
        assert!((h2 - h1 - 2.0 * 2f64.ln()).abs() < 0.05);
    }

    #[test]
    fn renyi_alpha_guards() {
        let x = uniform(50, 2, 7);
        assert_eq!(renyi_knn(&x, &knn_spec().with_alpha(1.0)), Err(EntropyError::AlphaInvalid(1.0)));
        assert_eq!(renyi_knn(&x, &knn_spec().with_alpha(6.5)), Err(EntropyError::AlphaInvalid(6.5)));
        let spec = EstimatorSpec::new(EstimatorKind::Knn1k).with_alpha(1.2);
        assert_eq!(renyi_knn_graph(&x, &spec), Err(EntropyError::AlphaInvalid(1.2)));
    }

    #[test]
    fn knn_graph_is_permutation_invariant() {
        let x = uniform(300, 3, 8);
        let rev: Vec<usize> = (0..300).rev().collect();
        let spec = EstimatorSpec::new(EstimatorKind::Knn1k);
        let a = renyi_knn_graph(&x, &spec).unwrap().value;
        let b = renyi_knn_graph(&x.select(&rev), &spec).unwrap().value;
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn log_mean_exp_matches_direct() {
        let v = [0.1, -2.0, 3.5];
        let direct = (v.iter().map(|x: &f64| x.exp()).sum::<f64>() / 3.0).ln();
        assert!((log_mean_exp(&v) - direct).abs() < 1e-14);
    }
}
