//! Monte-Carlo calibration of quasi-additive constants.
//!
//! For the kNN-graph and MST functionals `L_p(X) / T^alpha` converges to
//! `gamma * exp((1-alpha) H_alpha)`, with a distribution-free `gamma` that has
//! no closed form. Since `H_alpha = 0` for the uniform law on `[0,1]^d`,
//! `gamma` is estimated as the mean of `L / T^alpha` over uniform samples of
//! the same size.

use std::collections::HashMap;
use std::sync::{Mutex, OnceLock, RwLock};

use rand::Rng as _;

use super::mst::mst_length;
use super::nn::knn_graph_length;
use super::{EntropyError, EstimatorKind, EstimatorSpec};
use crate::features::FeatureSet;
use crate::seed;

/// Repetitions used when an estimator calibrates itself.
pub const DEFAULT_REPS: usize = 8;
/// Seed used when an estimator calibrates itself.
pub const DEFAULT_SEED: u64 = 0x00C0_FFEE;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
struct Key {
    kind: EstimatorKind,
    dim: usize,
    alpha_bits: u64,
    neighbor_set: Vec<usize>,
    size: usize,
    reps: usize,
    seed: u64,
}

fn cache() -> &'static RwLock<HashMap<Key, f64>> {
    static CACHE: OnceLock<RwLock<HashMap<Key, f64>>> = OnceLock::new();
    CACHE.get_or_init(|| RwLock::new(HashMap::new()))
}

// serializes fills so each key is simulated once
fn fill_lock() -> &'static Mutex<()> {
    static LOCK: OnceLock<Mutex<()>> = OnceLock::new();
    LOCK.get_or_init(|| Mutex::new(()))
}

/// Estimate the constant (`gamma` for `knn_1k`, `beta` for `mst`) for
/// dimension `d`, sample size `size`, using `reps` uniform sets.
///
/// Results are memoized by `(kind, d, alpha, S, size, reps, seed)`.
pub fn calibrate_constant(
    spec: &EstimatorSpec,
    d: usize,
    size: usize,
    reps: usize,
    seed: u64,
) -> Result<f64, EntropyError> {
    if !spec.kind.has_constant() {
        return Err(EntropyError::InvalidParameter(format!("{} has no quasi-additive constant", spec.kind)));
    }
    if d == 0 || reps == 0 {
        return Err(EntropyError::InvalidParameter("calibration needs d >= 1 and reps >= 1".into()));
    }
    let key = Key {
        kind: spec.kind,
        dim: d,
        alpha_bits: spec.alpha.to_bits(),
        neighbor_set: if spec.kind == EstimatorKind::Knn1k { spec.neighbor_set.clone() } else { Vec::new() },
        size,
        reps,
        seed,
    };
    if let Some(&v) = cache().read().unwrap().get(&key) {
        return Ok(v);
    }
    let _guard = fill_lock().lock().unwrap();
    if let Some(&v) = cache().read().unwrap().get(&key) {
        return Ok(v);
    }
    let v = simulate(spec, d, size, reps, seed)?;
    cache().write().unwrap().insert(key, v);
    Ok(v)
}

fn simulate(spec: &EstimatorSpec, d: usize, size: usize, reps: usize, seed: u64) -> Result<f64, EntropyError> {
    let scale = (size as f64).powf(spec.alpha);
    let mut acc = 0.0;
    for r in 0..reps {
        let mut rng = seed::rng(seed::derive(seed, &[seed::stream::CALIBRATION, d as u64, size as u64, r as u64]));
        let data = (0..size * d).map(|_| rng.random::<f64>()).collect();
        let x = FeatureSet::from_flat(data, size, d)
            .map_err(|e| EntropyError::InvalidParameter(e.to_string()))?;
        let len = match spec.kind {
            EstimatorKind::Knn1k => knn_graph_length(&x, spec)?,
            _ => mst_length(&x, d as f64 * (1.0 - spec.alpha))?,
        };
        acc += len / scale;
    }
    Ok(acc / reps as f64)
}

/// The constant an estimator divides by: calibrated when requested, else 1.
pub(crate) fn constant_for(spec: &EstimatorSpec, d: usize, size: usize) -> Result<f64, EntropyError> {
    if spec.calibrate {
        calibrate_constant(spec, d, size, DEFAULT_REPS, DEFAULT_SEED)
    } else {
        Ok(1.0)
    }
}
