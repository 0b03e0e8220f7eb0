//! The distributed random-projection ensemble.
//!
//! 1. shuffle the `T` samples and cut them into `N = floor(T/G)` groups,
//! 2. project group `n` with its own Gaussian `d x D` matrix `R_n`,
//! 3. estimate the entropy of every projected group and average:
//!    `H = (1/N) sum_n H(R_n v_n)`.
//!
//! Groups are processed in parallel; the average is a fixed-order fold over
//! the group index, so the result does not depend on the worker count.

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::entropy::{EntropyError, EntropyEstimate, EntropyEstimator};
use crate::features::FeatureSet;
use crate::rproj::{project, ProjectionError, ProjectionMatrix};
use crate::seed;

/// Fraction of skipped groups above which an ensemble result is flagged.
pub const SKIP_FLAG_FRACTION: f64 = 0.10;

#[derive(Debug, Error)]
pub enum EnsembleError {
    #[error("group size {group} exceeds sample count {samples}")]
    GroupTooLarge { samples: usize, group: usize },
    #[error("group size must be at least 2, got {0}")]
    InvalidGroupSize(usize),
    #[error("plan covers {plan} samples but the feature set has {samples}")]
    PlanMismatch { plan: usize, samples: usize },
    #[error("all {0} groups were degenerate")]
    AllGroupsDegenerate(usize),
    #[error("groups of {got} samples are too small for the estimator (needs {needed})")]
    TooFewSamples { needed: usize, got: usize },
    #[error("projection dimension must be at least 1")]
    ZeroDimension,
    #[error(transparent)]
    Projection(#[from] ProjectionError),
    #[error(transparent)]
    Estimator(#[from] EntropyError),
}

/// Random partition of sample indices into groups.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupPlan {
    groups: Vec<Vec<usize>>,
    group_size: usize,
    samples: usize,
    master_seed: u64,
    group_seeds: Vec<u64>,
}

impl GroupPlan {
    /// One group holding every sample, in order.
    pub fn single(samples: usize, master_seed: u64) -> Self {
        Self {
            groups: vec![(0..samples).collect()],
            group_size: samples,
            samples,
            master_seed,
            group_seeds: vec![seed::derive(master_seed, &[seed::stream::GROUP, 0])],
        }
    }

    /// Sample indices of every group, each list ascending.
    pub fn groups(&self) -> &[Vec<usize>] {
        &self.groups
    }

    pub fn group_count(&self) -> usize {
        self.groups.len()
    }

    /// Target group size `G`.
    pub fn group_size(&self) -> usize {
        self.group_size
    }

    pub fn samples(&self) -> usize {
        self.samples
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn group_seeds(&self) -> &[u64] {
        &self.group_seeds
    }

    pub fn smallest_group(&self) -> usize {
        self.groups.iter().map(Vec::len).min().unwrap_or(0)
    }
}

/// Shuffle `0..samples` with `master_seed`, cut `floor(T/G)` blocks of `G`
/// and hand the `T mod G` leftovers round-robin to the first groups.
pub fn make_plan(samples: usize, group_size: usize, master_seed: u64) -> Result<GroupPlan, EnsembleError> {
    if group_size < 2 {
        return Err(EnsembleError::InvalidGroupSize(group_size));
    }
    if samples < group_size {
        return Err(EnsembleError::GroupTooLarge { samples, group: group_size });
    }
    let mut perm: Vec<usize> = (0..samples).collect();
    perm.shuffle(&mut seed::rng(seed::derive(master_seed, &[seed::stream::PLAN])));
    let n = samples / group_size;
    let mut groups: Vec<Vec<usize>> = perm[..n * group_size].chunks_exact(group_size).map(<[usize]>::to_vec).collect();
    for (i, &idx) in perm[n * group_size..].iter().enumerate() {
        groups[i % n].push(idx);
    }
    for g in &mut groups {
        g.sort_unstable();
    }
    let group_seeds = (0..n as u64).map(|i| seed::derive(master_seed, &[seed::stream::GROUP, i])).collect();
    Ok(GroupPlan { groups, group_size, samples, master_seed, group_seeds })
}

/// How each group is mapped before estimation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ProjectionMode {
    /// Fresh `d x D` Gaussian matrix per group.
    Gaussian { d: usize },
    /// No projection (`d = D`, `R_n = I`).
    Identity,
}

/// Averaged group estimates plus skip accounting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleEstimate {
    /// Mean over the non-degenerate groups, in nats.
    pub value: f64,
    pub n_groups: usize,
    pub n_skipped: usize,
    /// More than [`SKIP_FLAG_FRACTION`] of the groups were skipped.
    pub flagged: bool,
    /// Per-group estimate, `None` for skipped groups.
    pub group_values: Vec<Option<f64>>,
    /// Dimension the estimator saw.
    pub dim: usize,
    pub constant_calibrated: bool,
}

impl EnsembleEstimate {
    pub fn n_effective(&self) -> usize {
        self.n_groups - self.n_skipped
    }
}

/// Run `f` on a dedicated pool of `workers` threads, or on the current pool.
pub fn with_workers<R: Send>(workers: Option<usize>, f: impl FnOnce() -> R + Send) -> R {
    match workers {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .expect("failed to build worker pool")
            .install(f),
        None => f(),
    }
}

/// Ensemble estimate with Gaussian projections to dimension `d`.
pub fn ensemble_entropy<E: EntropyEstimator>(
    x: &FeatureSet,
    plan: &GroupPlan,
    d: usize,
    estimator: &E,
) -> Result<EnsembleEstimate, EnsembleError> {
    ensemble_entropy_with(x, plan, ProjectionMode::Gaussian { d }, estimator)
}

/// Ensemble estimate with an explicit projection mode. Runs on the current
/// rayon pool; wrap in [`with_workers`] to pin the worker count.
pub fn ensemble_entropy_with<E: EntropyEstimator>(
    x: &FeatureSet,
    plan: &GroupPlan,
    mode: ProjectionMode,
    estimator: &E,
) -> Result<EnsembleEstimate, EnsembleError> {
    if plan.samples != x.len() {
        return Err(EnsembleError::PlanMismatch { plan: plan.samples, samples: x.len() });
    }
    if let ProjectionMode::Gaussian { d: 0 } = mode {
        return Err(EnsembleError::ZeroDimension);
    }
    let needed = estimator.min_samples();
    if plan.smallest_group() < needed {
        return Err(EnsembleError::TooFewSamples { needed, got: plan.smallest_group() });
    }

    let results: Vec<Result<Option<EntropyEstimate>, EnsembleError>> = plan
        .groups
        .par_iter()
        .zip(plan.group_seeds.par_iter())
        .map(|(indices, &group_seed)| {
            let group = x.select(indices);
            let projected = match mode {
                ProjectionMode::Gaussian { d } => {
                    project(&ProjectionMatrix::gaussian(d, x.dim(), group_seed)?, &group)?
                }
                ProjectionMode::Identity => group,
            };
            match estimator.estimate(&projected) {
                Ok(est) => Ok(Some(est)),
                Err(e) if e.is_degenerate() => Ok(None),
                Err(e) => Err(e.into()),
            }
        })
        .collect();

    let mut group_values = Vec::with_capacity(results.len());
    let mut sum = 0.0;
    let mut n_ok = 0usize;
    let mut calibrated = false;
    for r in results {
        match r? {
            Some(est) => {
                sum += est.value;
                n_ok += 1;
                calibrated |= est.constant_calibrated;
                group_values.push(Some(est.value));
            }
            None => group_values.push(None),
        }
    }
    let n_groups = group_values.len();
    if n_ok == 0 {
        return Err(EnsembleError::AllGroupsDegenerate(n_groups));
    }
    let n_skipped = n_groups - n_ok;
    Ok(EnsembleEstimate {
        value: sum / n_ok as f64,
        n_groups,
        n_skipped,
        flagged: n_skipped as f64 > SKIP_FLAG_FRACTION * n_groups as f64,
        group_values,
        dim: match mode {
            ProjectionMode::Gaussian { d } => d,
            ProjectionMode::Identity => x.dim(),
        },
        constant_calibrated: calibrated,
    })
}

/// The estimator on raw data: no grouping, no projection.
pub fn baseline_entropy<E: EntropyEstimator>(x: &FeatureSet, estimator: &E) -> Result<EntropyEstimate, EnsembleError> {
    let needed = estimator.min_samples();
    if x.len() < needed {
        return Err(EnsembleError::Estimator(EntropyError::TooFewSamples { needed, got: x.len() }));
    }
    Ok(estimator.estimate(x)?)
}
