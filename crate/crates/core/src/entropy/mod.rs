//! Nonparametric entropy estimators.
//!
//! Five estimators share a small set of geometric kernels (k-nearest-neighbor
//! tables and Euclidean minimum spanning trees):
//!
//! | kind      | estimates | module        |
//! |-----------|-----------|---------------|
//! | `kdp`     | Shannon   | [`kdp`]       |
//! | `knn_k`   | Rényi     | [`nn`]        |
//! | `knn_1k`  | Rényi     | [`nn`]        |
//! | `mst`     | Rényi     | [`mst`]       |
//! | `wknn`    | Shannon   | [`wknn`]      |
//!
//! All values are in nats.

pub mod calibration;
pub mod kdp;
pub mod knn;
pub mod mst;
pub mod nn;
pub mod special;
pub mod wknn;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::FeatureSet;

pub use calibration::calibrate_constant;
pub use kdp::kdp_entropy;
pub use knn::{knn_distances, KdTree, KnnTable};
pub use mst::{euclidean_mst, renyi_mst};
pub use nn::{renyi_knn, renyi_knn_graph, shannon_knn};
pub use wknn::{shannon_wknn, solve_wknn_weights, WknnWeights};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EntropyError {
    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("degenerate sample: {0}")]
    DegenerateSample(String),
    #[error("invalid Rényi order alpha = {0}")]
    AlphaInvalid(f64),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("invalid k range [{0}, {1}]")]
    InvalidRange(usize, usize),
    #[error("zero-volume cell: all points identical along an axis")]
    ZeroVolume,
}

impl EntropyError {
    /// Errors caused by the data rather than the configuration.
    pub fn is_degenerate(&self) -> bool {
        matches!(self, EntropyError::DegenerateSample(_) | EntropyError::ZeroVolume)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EstimatorKind {
    #[serde(rename = "kdp")]
    Kdp,
    #[serde(rename = "knn_k")]
    KnnK,
    #[serde(rename = "knn_1k")]
    Knn1k,
    #[serde(rename = "mst")]
    Mst,
    #[serde(rename = "wknn")]
    Wknn,
}

impl EstimatorKind {
    pub const ALL: [EstimatorKind; 5] =
        [EstimatorKind::Kdp, EstimatorKind::KnnK, EstimatorKind::Knn1k, EstimatorKind::Mst, EstimatorKind::Wknn];

    pub fn name(self) -> &'static str {
        match self {
            EstimatorKind::Kdp => "kdp",
            EstimatorKind::KnnK => "knn_k",
            EstimatorKind::Knn1k => "knn_1k",
            EstimatorKind::Mst => "mst",
            EstimatorKind::Wknn => "wknn",
        }
    }

    /// Whether the estimator has a quasi-additive constant that can be calibrated.
    pub fn has_constant(self) -> bool {
        matches!(self, EstimatorKind::Knn1k | EstimatorKind::Mst)
    }
}

impl std::fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for EstimatorKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "kdp" => Ok(EstimatorKind::Kdp),
            "knn_k" | "knnk" | "knn" => Ok(EstimatorKind::KnnK),
            "knn_1k" | "knn1k" | "knn_1-k" => Ok(EstimatorKind::Knn1k),
            "mst" => Ok(EstimatorKind::Mst),
            "wknn" => Ok(EstimatorKind::Wknn),
            other => Err(format!("unknown estimator `{other}`")),
        }
    }
}

pub const DEFAULT_K: usize = 5;
pub const DEFAULT_ALPHA: f64 = 0.95;
pub const DEFAULT_WKNN_RANGE: (usize, usize) = (2, 10);
pub const DEFAULT_KDP_MIN_CELL: usize = 1;

/// Estimator selection plus hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorSpec {
    pub kind: EstimatorKind,
    /// Neighbor count for `knn_k` and the upper end of the default `S`.
    pub k: usize,
    /// Rényi order for `knn_k`, `knn_1k` and `mst`.
    pub alpha: f64,
    /// Neighbor index set `S` for `knn_1k` (1-based ranks).
    pub neighbor_set: Vec<usize>,
    pub wknn_range: (usize, usize),
    pub kdp_min_cell: usize,
    /// Divide out a Monte-Carlo estimate of the quasi-additive constant.
    pub calibrate: bool,
    /// Answer neighbor queries with a k-d tree instead of a brute-force scan.
    pub use_kdtree: bool,
    /// Optional uniform jitter magnitude applied before estimation.
    pub jitter: Option<f64>,
}

impl EstimatorSpec {
    pub fn new(kind: EstimatorKind) -> Self {
        Self {
            kind,
            k: DEFAULT_K,
            alpha: DEFAULT_ALPHA,
            neighbor_set: (1..=DEFAULT_K).collect(),
            wknn_range: DEFAULT_WKNN_RANGE,
            kdp_min_cell: DEFAULT_KDP_MIN_CELL,
            calibrate: false,
            use_kdtree: false,
            jitter: None,
        }
    }

    /// Sets `k` and resets `S` to `{1, ..., k}`.
    pub fn with_k(mut self, k: usize) -> Self {
        self.k = k;
        self.neighbor_set = (1..=k).collect();
        self
    }

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha = alpha;
        self
    }

    pub fn with_calibration(mut self, on: bool) -> Self {
        self.calibrate = on;
        self
    }

    pub fn with_wknn_range(mut self, k_min: usize, k_max: usize) -> Self {
        self.wknn_range = (k_min, k_max);
        self
    }

    pub fn with_kdtree(mut self, on: bool) -> Self {
        self.use_kdtree = on;
        self
    }

    pub fn validate(&self) -> Result<(), EntropyError> {
        if self.k == 0 {
            return Err(EntropyError::InvalidParameter("k must be at least 1".into()));
        }
        match self.kind {
            EstimatorKind::KnnK => {
                if !self.alpha.is_finite() || self.alpha <= 0.0 || self.alpha == 1.0 {
                    return Err(EntropyError::AlphaInvalid(self.alpha));
                }
            }
            EstimatorKind::Knn1k | EstimatorKind::Mst => {
                if !(self.alpha > 0.0 && self.alpha < 1.0) {
                    return Err(EntropyError::AlphaInvalid(self.alpha));
                }
            }
            EstimatorKind::Wknn => {
                let (lo, hi) = self.wknn_range;
                if lo == 0 || lo >= hi {
                    return Err(EntropyError::InvalidRange(lo, hi));
                }
            }
            EstimatorKind::Kdp => {}
        }
        if self.kind == EstimatorKind::Knn1k
            && (self.neighbor_set.is_empty() || self.neighbor_set.iter().any(|&j| j == 0 || j > self.k))
        {
            return Err(EntropyError::InvalidParameter(format!(
                "neighbor set {:?} must be a nonempty subset of 1..={}",
                self.neighbor_set, self.k
            )));
        }
        Ok(())
    }

    /// Smallest sample count the estimator accepts.
    pub fn min_samples(&self) -> usize {
        match self.kind {
            EstimatorKind::Kdp | EstimatorKind::Mst => 2,
            EstimatorKind::KnnK => self.k + 1,
            EstimatorKind::Knn1k => self.neighbor_set.iter().copied().max().unwrap_or(self.k) + 1,
            EstimatorKind::Wknn => self.wknn_range.1 + 1,
        }
    }

    /// Run the selected estimator on `x`.
    pub fn estimate(&self, x: &FeatureSet) -> Result<EntropyEstimate, EntropyError> {
        self.validate()?;
        let jittered;
        let x = match self.jitter {
            Some(mag) if mag > 0.0 => {
                jittered = x.jittered(mag, 0);
                &jittered
            }
            _ => x,
        };
        match self.kind {
            EstimatorKind::Kdp => kdp_entropy(x, self.kdp_min_cell),
            EstimatorKind::KnnK => renyi_knn(x, self),
            EstimatorKind::Knn1k => renyi_knn_graph(x, self),
            EstimatorKind::Mst => renyi_mst(x, self),
            EstimatorKind::Wknn => shannon_wknn(x, self),
        }
    }
}

/// One entropy estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EntropyEstimate {
    /// Estimated entropy in nats; always finite.
    pub value: f64,
    pub kind: EstimatorKind,
    /// Sample count.
    pub samples: usize,
    /// Dimension of the samples.
    pub dim: usize,
    pub constant_calibrated: bool,
}

impl EntropyEstimate {
    pub(crate) fn new(
        value: f64,
        kind: EstimatorKind,
        x: &FeatureSet,
        constant_calibrated: bool,
    ) -> Result<Self, EntropyError> {
        if !value.is_finite() {
            return Err(EntropyError::DegenerateSample(format!("non-finite estimate {value}")));
        }
        Ok(Self { value, kind, samples: x.len(), dim: x.dim(), constant_calibrated })
    }
}

/// Anything that maps a sample set to an entropy estimate. Implemented by
/// [`EstimatorSpec`]; the ensemble is generic over it.
pub trait EntropyEstimator: Sync {
    fn estimate(&self, x: &FeatureSet) -> Result<EntropyEstimate, EntropyError>;

    fn min_samples(&self) -> usize;
}

impl EntropyEstimator for EstimatorSpec {
    fn estimate(&self, x: &FeatureSet) -> Result<EntropyEstimate, EntropyError> {
        EstimatorSpec::estimate(self, x)
    }

    fn min_samples(&self) -> usize {
        EstimatorSpec::min_samples(self)
    }
}

#[inline]
pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub(crate) fn require_samples(x: &FeatureSet, needed: usize) -> Result<(), EntropyError> {
    if x.len() < needed {
        Err(EntropyError::TooFewSamples { needed, got: x.len() })
    } else {
        Ok(())
    }
}
