//! Registration objectives and angle sweeps.
//!
//! For each candidate angle the test image is rotated and compared with the
//! reference over a pixel set that is fixed for the whole sweep (computed
//! from the largest `|theta|` in the grid), so objective values at different
//! angles are built from the same number of samples at the same places.

use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ensemble::{ensemble_entropy_with, make_plan, EnsembleError, ProjectionMode};
use crate::entropy::EstimatorSpec;
use crate::features::{extract_patch, joint_features_at, sample_pixels, FeatureError};
use crate::image_io::{rotate, valid_region, ImageError, ImageGrid, PixelRect};
use crate::seed;

#[derive(Debug, Error)]
pub enum RegistrationError {
    #[error("reference is {0}x{1} but test is {2}x{3}")]
    SizeMismatch(usize, usize, usize, usize),
    #[error("empty angle grid")]
    EmptyGrid,
    #[error("invalid angle grid: {0}")]
    InvalidGrid(String),
    #[error("no angle produced a valid objective value")]
    NoValidAngle,
    #[error("invalid norm order {0}; expected 1 or 2")]
    InvalidNorm(u32),
    #[error(transparent)]
    Image(#[from] ImageError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Ensemble(#[from] EnsembleError),
}

/// Sorted, deduplicated rotation angles in degrees.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AngleGrid(Vec<f64>);

// angles closer than this are the same grid point
const ANGLE_QUANTUM: f64 = 1e-9;

impl AngleGrid {
    pub fn new(mut angles: Vec<f64>) -> Result<Self, RegistrationError> {
        if angles.is_empty() {
            return Err(RegistrationError::EmptyGrid);
        }
        if let Some(a) = angles.iter().find(|a| !a.is_finite()) {
            return Err(RegistrationError::InvalidGrid(format!("non-finite angle {a}")));
        }
        angles.sort_by(f64::total_cmp);
        angles.dedup_by(|a, b| (*a - *b).abs() < ANGLE_QUANTUM);
        Ok(Self(angles))
    }

    /// `-10..=10` by `0.5` merged with `-1..=1` by `0.1` (57 angles).
    pub fn paper() -> Self {
        let coarse = (-20..=20).map(|i| i as f64 / 2.0);
        let fine = (-10..=10).map(|i| i as f64 / 10.0);
        Self::new(coarse.chain(fine).collect()).expect("static grid")
    }

    /// `lo, lo+step, ...` up to `hi` inclusive.
    pub fn range(lo: f64, hi: f64, step: f64) -> Result<Self, RegistrationError> {
        if step.is_nan() || step <= 0.0 || hi < lo {
            return Err(RegistrationError::InvalidGrid(format!("range {lo}:{hi}:{step}")));
        }
        let n = ((hi - lo) / step + 1e-9).floor() as usize;
        // snap to 1e-9 so 0.1-steps print as 0.3 rather than 0.30000000000000004
        Self::new((0..=n).map(|i| ((lo + i as f64 * step) * 1e9).round() / 1e9).collect())
    }

    /// Parse `paper`, `lo:hi:step` or a comma-separated list.
    pub fn parse(s: &str) -> Result<Self, RegistrationError> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("paper") {
            return Ok(Self::paper());
        }
        let bad = |_| RegistrationError::InvalidGrid(s.to_string());
        if s.contains(':') {
            let parts: Vec<f64> = s.split(':').map(|p| p.trim().parse::<f64>().map_err(bad)).collect::<Result<_, _>>()?;
            if let [lo, hi, step] = parts[..] {
                return Self::range(lo, hi, step);
            }
            return Err(RegistrationError::InvalidGrid(s.to_string()));
        }
        Self::new(s.split(',').map(|p| p.trim().parse::<f64>().map_err(bad)).collect::<Result<_, _>>()?)
    }

    pub fn angles(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0, |m, a| m.max(a.abs()))
    }
}

/// Pixels sampled for a sweep; fixed across all angles.
#[derive(Debug, Clone, PartialEq)]
pub struct Sampling {
    pub h: usize,
    pub region: PixelRect,
    pub pixels: Vec<(usize, usize)>,
}

impl Sampling {
    pub fn new(
        width: usize,
        height: usize,
        max_theta: f64,
        h: usize,
        max_samples: Option<usize>,
        seed: u64,
    ) -> Result<Self, RegistrationError> {
        let region = valid_region(width, height, max_theta, h)?;
        if max_samples == Some(0) {
            return Err(FeatureError::EmptyRegion.into());
        }
        let pixels = sample_pixels(region, max_samples, seed);
        Ok(Self { h, region, pixels })
    }
}

/// Settings of the entropy objective.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntropyObjective {
    pub projection: ProjectionMode,
    pub group_size: usize,
    pub spec: EstimatorSpec,
}

/// Similarity measure maximized over the grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Objective {
    /// Negative joint entropy of the features.
    Entropy(EntropyObjective),
    /// Negative sum of per-pixel `L_q` feature distances.
    Norm { q: u32 },
}

/// One objective evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveValue {
    pub value: f64,
    pub samples: usize,
    pub dim: usize,
    pub n_groups: usize,
    pub n_skipped: usize,
    pub flagged: bool,
    pub constant_calibrated: bool,
}

fn check_sizes(a: &ImageGrid, b: &ImageGrid) -> Result<(), RegistrationError> {
    if a.width() != b.width() || a.height() != b.height() {
        return Err(RegistrationError::SizeMismatch(a.width(), a.height(), b.width(), b.height()));
    }
    Ok(())
}

/// `J_H(theta) = -H([f(p, ref); f(p, test(theta))])` with the ensemble
/// estimator; `plan_seed` drives both grouping and projections.
pub fn objective_entropy(
    reference: &ImageGrid,
    test: &ImageGrid,
    theta: f64,
    sampling: &Sampling,
    objective: &EntropyObjective,
    plan_seed: u64,
) -> Result<ObjectiveValue, RegistrationError> {
    check_sizes(reference, test)?;
    let rotated = rotate(test, theta)?;
    let x = joint_features_at(reference, &rotated, sampling.h, sampling.pixels.clone())?;
    let plan = make_plan(x.len(), objective.group_size, plan_seed)?;
    let est = ensemble_entropy_with(&x, &plan, objective.projection, &objective.spec)?;
    Ok(ObjectiveValue {
        value: -est.value,
        samples: x.len(),
        dim: est.dim,
        n_groups: est.n_groups,
        n_skipped: est.n_skipped,
        flagged: est.flagged,
        constant_calibrated: est.constant_calibrated,
    })
}

/// `J_q(theta) = -sum_p ||f(p, ref) - f(p, test(theta))||_q`, `q in {1, 2}`.
pub fn objective_norm(
    reference: &ImageGrid,
    test: &ImageGrid,
    theta: f64,
    sampling: &Sampling,
    q: u32,
) -> Result<ObjectiveValue, RegistrationError> {
    if q != 1 && q != 2 {
        return Err(RegistrationError::InvalidNorm(q));
    }
    check_sizes(reference, test)?;
    let rotated = rotate(test, theta)?;
    let mut total = 0.0;
    for &(x, y) in &sampling.pixels {
        let a = extract_patch(reference, x, y, sampling.h)?;
        let b = extract_patch(&rotated, x, y, sampling.h)?;
        total += match q {
            1 => a.iter().zip(&b).map(|(u, v)| (u - v).abs()).sum::<f64>(),
            _ => a.iter().zip(&b).map(|(u, v)| (u - v) * (u - v)).sum::<f64>().sqrt(),
        };
    }
    let side = 2 * sampling.h + 1;
    Ok(ObjectiveValue {
        value: -total,
        samples: sampling.pixels.len(),
        dim: side * side,
        n_groups: 0,
        n_skipped: 0,
        flagged: false,
        constant_calibrated: false,
    })
}

/// Everything a sweep needs besides the images and the grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepParams {
    pub h: usize,
    pub objective: Objective,
    pub seed: u64,
    pub max_samples: Option<usize>,
}

/// Objective at one angle. `value` is `None` when the evaluation failed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AngleRecord {
    pub theta: f64,
    pub value: Option<f64>,
    pub elapsed_ms: f64,
    pub samples: usize,
    pub dim: usize,
    pub n_groups: usize,
    pub n_skipped: usize,
    pub constant_calibrated: bool,
    pub flags: Vec<String>,
    /// Why `value` is missing.
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub per_angle: Vec<AngleRecord>,
    pub theta_star: f64,
    pub error_deg: f64,
    pub region: PixelRect,
    pub samples: usize,
}

impl SweepResult {
    pub fn total_elapsed_ms(&self) -> f64 {
        self.per_angle.iter().map(|r| r.elapsed_ms).sum()
    }

    pub fn invalid_angles(&self) -> usize {
        self.per_angle.iter().filter(|r| r.value.is_none()).count()
    }

    pub fn total_skipped(&self) -> usize {
        self.per_angle.iter().map(|r| r.n_skipped).sum()
    }

    /// Group count of the first valid angle (constant across a sweep).
    pub fn n_groups(&self) -> usize {
        self.per_angle.iter().find(|r| r.value.is_some()).map_or(0, |r| r.n_groups)
    }

    /// Union of the per-angle flags, sorted.
    pub fn flags(&self) -> Vec<String> {
        let mut all: Vec<String> = self.per_angle.iter().flat_map(|r| r.flags.iter().cloned()).collect();
        all.sort();
        all.dedup();
        all
    }
}

/// Angle of the largest value; ties go to the smallest `|theta|`, then the
/// smallest `theta`.
pub fn argmax_angle(values: impl IntoIterator<Item = (f64, f64)>) -> Option<f64> {
    values
        .into_iter()
        .filter(|(_, v)| !v.is_nan())
        .fold(None, |best: Option<(f64, f64)>, (theta, v)| match best {
            None => Some((theta, v)),
            Some((bt, bv)) => {
                let better = v > bv
                    || (v == bv && (theta.abs() < bt.abs() || (theta.abs() == bt.abs() && theta < bt)));
                Some(if better { (theta, v) } else { (bt, bv) })
            }
        })
        .map(|(theta, _)| theta)
}

/// Evaluate the objective at every angle and locate the maximum.
///
/// Each angle gets its own group plan and projections from
/// `derive(seed, [ANGLE, index])`; the sampled pixels depend only on `seed`.
pub fn sweep(
    reference: &ImageGrid,
    test: &ImageGrid,
    grid: &AngleGrid,
    params: &SweepParams,
) -> Result<SweepResult, RegistrationError> {
    check_sizes(reference, test)?;
    if grid.is_empty() {
        return Err(RegistrationError::EmptyGrid);
    }
    let sampling = Sampling::new(
        reference.width(),
        reference.height(),
        grid.max_abs(),
        params.h,
        params.max_samples,
        params.seed,
    )?;
    let mut per_angle = Vec::with_capacity(grid.len());
    for (i, &theta) in grid.angles().iter().enumerate() {
        let start = Instant::now();
        let result = match &params.objective {
            Objective::Entropy(obj) => {
                let plan_seed = seed::derive(params.seed, &[seed::stream::ANGLE, i as u64]);
                objective_entropy(reference, test, theta, &sampling, obj, plan_seed)
            }
            Objective::Norm { q } => objective_norm(reference, test, theta, &sampling, *q),
        };
        let elapsed_ms = start.elapsed().as_secs_f64() * 1e3;
        per_angle.push(match result {
            Ok(v) => AngleRecord {
                theta,
                value: Some(v.value),
                elapsed_ms,
                samples: v.samples,
                dim: v.dim,
                n_groups: v.n_groups,
                n_skipped: v.n_skipped,
                constant_calibrated: v.constant_calibrated,
                flags: if v.flagged { vec!["skipped_groups".into()] } else { Vec::new() },
                error: None,
            },
            Err(e @ RegistrationError::Ensemble(_)) => AngleRecord {
                theta,
                value: None,
                elapsed_ms,
                samples: sampling.pixels.len(),
                dim: 0,
                n_groups: 0,
                n_skipped: 0,
                constant_calibrated: false,
                flags: vec!["invalid_angle".into()],
                error: Some(e.to_string()),
            },
            Err(e) => return Err(e),
        });
    }
    let theta_star = argmax_angle(per_angle.iter().filter_map(|r| r.value.map(|v| (r.theta, v))))
        .ok_or(RegistrationError::NoValidAngle)?;
    Ok(SweepResult {
        per_angle,
        theta_star,
        error_deg: theta_star.abs(),
        region: sampling.region,
        samples: sampling.pixels.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::entropy::EstimatorKind;

    fn texture(w: usize, h: usize, s: u64) -> ImageGrid {
        use rand::Rng as _;
        let mut rng = seed::rng(s);
        let coarse: Vec<f64> = (0..(w / 4 + 2) * (h / 4 + 2)).map(|_| rng.random()).collect();
        let cw = w / 4 + 2;
        ImageGrid::from_fn(w, h, |x, y| {
            let (fx, fy) = (x as f64 / 4.0, y as f64 / 4.0);
            let (x0, y0) = (fx.floor() as usize, fy.floor() as usize);
            let (tx, ty) = (fx - x0 as f64, fy - y0 as f64);
            let c = |a: usize, b: usize| coarse[b * cw + a];
            c(x0, y0) * (1.0 - tx) * (1.0 - ty)
                + c(x0 + 1, y0) * tx * (1.0 - ty)
                + c(x0, y0 + 1) * (1.0 - tx) * ty
                + c(x0 + 1, y0 + 1) * tx * ty
        })
        .unwrap()
    }

    #[test]
    fn paper_grid_shape() {
        let g = AngleGrid::paper();
        assert_eq!(g.len(), 57);
        assert!(g.angles().contains(&0.0));
        assert_eq!(g.angles()[0], -10.0);
        assert_eq!(*g.angles().last().unwrap(), 10.0);
        assert!(g.angles().windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn grid_parsing() {
        assert_eq!(AngleGrid::parse("paper").unwrap(), AngleGrid::paper());
        assert_eq!(AngleGrid::parse("-1:1:0.5").unwrap().angles(), &[-1.0, -0.5, 0.0, 0.5, 1.0]);
        assert_eq!(AngleGrid::parse("2, -3, 2").unwrap().angles(), &[-3.0, 2.0]);
        assert!(AngleGrid::parse("a,b").is_err());
        assert!(AngleGrid::parse("1:0:1").is_err());
        assert!(AngleGrid::new(vec![]).is_err());
    }

    #[test]
    fn argmax_tie_break() {
        assert_eq!(argmax_angle([(-1.0, 5.0), (1.0, 5.0), (0.5, 4.0)]), Some(-1.0));
        assert_eq!(argmax_angle([(2.0, 5.0), (-1.5, 5.0)]), Some(-1.5));
        assert_eq!(argmax_angle([(0.3, 1.0), (-0.2, 3.0), (0.1, 3.0)]), Some(0.1));
        assert_eq!(argmax_angle(std::iter::empty()), None);
    }

    #[test]
    fn argmax_ignores_constant_shift() {
        let vals = [(-2.0, -3.1), (-1.0, -2.7), (0.0, -2.9), (1.0, -2.7), (3.0, -5.0)];
        let base = argmax_angle(vals);
        for c in [-100.0, -1.5, 0.0, 7.25, 1e6] {
            assert_eq!(argmax_angle(vals.iter().map(|&(t, v)| (t, v + c))), base);
        }
    }

    #[test]
    fn norm_objective_properties() {
        let img = texture(24, 24, 1);
        let sampling = Sampling::new(24, 24, 5.0, 1, None, 0).unwrap();
        for q in [1, 2] {
            assert_eq!(objective_norm(&img, &img, 0.0, &sampling, q).unwrap().value, 0.0);
            assert!(objective_norm(&img, &img, 3.0, &sampling, q).unwrap().value < 0.0);
        }
        assert!(matches!(objective_norm(&img, &img, 0.0, &sampling, 3), Err(RegistrationError::InvalidNorm(3))));
    }

    #[test]
    fn norm_single_pixel_gap() {
        let a = ImageGrid::from_fn(5, 5, |_, _| 0.2).unwrap();
        let b = ImageGrid::from_fn(5, 5, |x, y| if (x, y) == (2, 2) { 0.7 } else { 0.2 }).unwrap();
        let sampling = Sampling::new(5, 5, 0.0, 0, None, 0).unwrap();
        let j1 = objective_norm(&a, &b, 0.0, &sampling, 1).unwrap().value;
        let j2 = objective_norm(&a, &b, 0.0, &sampling, 2).unwrap().value;
        assert!((j2 + 0.5).abs() < 1e-15);
        assert_eq!(j1, j2);
    }

    #[test]
    fn single_angle_sweep() {
        let img = texture(32, 32, 2);
        let params = SweepParams { h: 1, objective: Objective::Norm { q: 2 }, seed: 0, max_samples: None };
        let r = sweep(&img, &img, &AngleGrid::new(vec![0.0]).unwrap(), &params).unwrap();
        assert_eq!((r.theta_star, r.error_deg), (0.0, 0.0));
    }

    #[test]
    fn aligned_self_pair_has_lower_joint_entropy() {
        let img = texture(64, 64, 3);
        let sampling = Sampling::new(64, 64, 5.0, 1, None, 0).unwrap();
        let obj = EntropyObjective {
            projection: ProjectionMode::Gaussian { d: 3 },
            group_size: 100,
            spec: EstimatorSpec::new(EstimatorKind::KnnK),
        };
        let j0 = objective_entropy(&img, &img, 0.0, &sampling, &obj, 1).unwrap().value;
        let j5 = objective_entropy(&img, &img, 5.0, &sampling, &obj, 1).unwrap().value;
        assert!(j0 > j5, "{j0} vs {j5}");
    }

    #[test]
    fn sweep_records_share_metadata() {
        let img = texture(48, 48, 4);
        let params = SweepParams {
            h: 1,
            objective: Objective::Entropy(EntropyObjective {
                projection: ProjectionMode::Gaussian { d: 2 },
                group_size: 50,
                spec: EstimatorSpec::new(EstimatorKind::KnnK),
            }),
            seed: 5,
            max_samples: Some(600),
        };
        let r = sweep(&img, &img, &AngleGrid::parse("-2:2:1").unwrap(), &params).unwrap();
        let first = &r.per_angle[0];
        for rec in &r.per_angle {
            assert_eq!((rec.samples, rec.dim, rec.n_groups), (first.samples, first.dim, first.n_groups));
        }
        assert_eq!(r.samples, 600);
        assert_eq!(first.n_groups, 12);
    }
}
