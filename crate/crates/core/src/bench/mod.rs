//! Experiment lattices, box statistics and timing tables.
//!
//! An experiment runs `runs` seeded sweeps for every cell of the
//! `estimator x h x d x G` lattice. Run seeds come from the master seed, the
//! cell parameters and the run index, so the table does not depend on how
//! runs are scheduled over the worker pool.

mod stats;
pub mod synthetic;

use std::collections::HashMap;
use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use stats::{box_stats, BoxStats};

use crate::ensemble::{baseline_entropy, ensemble_entropy_with, make_plan, with_workers, EnsembleError, ProjectionMode};
use crate::entropy::{EstimatorKind, EstimatorSpec};
use crate::features::{joint_features, FeatureError, FeatureSet};
use crate::image_io::{load_image, sobel_magnitude, Channel, ImageError, ImageGrid, PixelRect};
use crate::registration::{sweep, AngleGrid, EntropyObjective, Objective, RegistrationError, SweepParams};
use crate::seed;

pub const CSV_HEADER: &str = "dataset,estimator,h,d,G,run,seed,theta_star_deg,error_deg,elapsed_ms,n_groups,n_skipped,flags";

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("no values to summarize")]
    EmptyInput,
    #[error("configuration error: {0}")]
    Config(String),
    #[error("dataset error: {0}")]
    Dataset(#[from] ImageError),
    #[error("every cell failed")]
    AllCellsFailed,
    #[error("cannot read previous results: {0}")]
    Resume(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Ensemble(#[from] EnsembleError),
}

/// Post-processing applied to a loaded channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Filter {
    None,
    Sobel,
}

impl FromStr for Filter {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "none" => Ok(Self::None),
            "sobel" => Ok(Self::Sobel),
            other => Err(format!("unknown filter {other:?}; expected none or sobel")),
        }
    }
}

/// Source of the reference/test pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dataset {
    /// Red channel against green channel of one color image.
    LenaStyle { source: PathBuf },
    /// Gray image against its Sobel magnitude.
    MandrillStyle { source: PathBuf },
    Custom {
        reference: PathBuf,
        test: PathBuf,
        ref_channel: Channel,
        test_channel: Channel,
        test_filter: Filter,
    },
}

impl Dataset {
    pub fn name(&self) -> &'static str {
        match self {
            Self::LenaStyle { .. } => "lena_style",
            Self::MandrillStyle { .. } => "mandrill_style",
            Self::Custom { .. } => "custom",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Emit {
    Csv,
    Json,
}

impl FromStr for Emit {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(Self::Csv),
            "json" => Ok(Self::Json),
            other => Err(format!("unknown output format {other:?}; expected csv or json")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub dataset: Dataset,
    pub estimators: Vec<EstimatorSpec>,
    pub h_set: Vec<usize>,
    pub d_set: Vec<usize>,
    pub g_set: Vec<usize>,
    pub runs: usize,
    pub master_seed: u64,
    pub max_samples: Option<usize>,
    pub angles: AngleGrid,
    pub output: Option<PathBuf>,
    pub emit: Emit,
    pub workers: Option<usize>,
    /// Record wall-clock times. With timing off `elapsed_ms` is left empty
    /// and the output is a pure function of the configuration.
    pub timing: bool,
    pub resume: bool,
}

impl ExperimentConfig {
    /// Single-cell defaults: kNN_k, h=3, d=5, G=100, 10 runs, paper grid.
    pub fn new(dataset: Dataset) -> Self {
        Self {
            dataset,
            estimators: vec![EstimatorSpec::new(EstimatorKind::KnnK)],
            h_set: vec![3],
            d_set: vec![5],
            g_set: vec![100],
            runs: 10,
            master_seed: 0,
            max_samples: None,
            angles: AngleGrid::paper(),
            output: None,
            emit: Emit::Csv,
            workers: None,
            timing: true,
            resume: false,
        }
    }

    pub fn validate(&self) -> Result<(), BenchError> {
        let fail = |m: &str| Err(BenchError::Config(m.into()));
        if self.estimators.is_empty() || self.h_set.is_empty() || self.d_set.is_empty() || self.g_set.is_empty() {
            return fail("estimator, h, d and G lists must be nonempty");
        }
        if self.runs == 0 {
            return fail("runs must be at least 1");
        }
        if self.d_set.contains(&0) {
            return fail("projection dimension must be at least 1");
        }
        if self.g_set.iter().any(|&g| g < 2) {
            return fail("group size must be at least 2");
        }
        if self.max_samples == Some(0) {
            return fail("max-samples must be positive");
        }
        if self.workers == Some(0) {
            return fail("workers must be positive");
        }
        if self.resume && self.output.is_none() {
            return fail("--resume needs an output path");
        }
        for (i, spec) in self.estimators.iter().enumerate() {
            spec.validate().map_err(|e| BenchError::Config(e.to_string()))?;
            if self.estimators[..i].iter().any(|s| s.kind == spec.kind) {
                return fail("each estimator may appear once");
            }
        }
        Ok(())
    }

    /// Lattice cells in output order.
    pub fn cells(&self) -> Vec<Cell> {
        let mut out = Vec::new();
        for spec in &self.estimators {
            for &h in &self.h_set {
                for &d in &self.d_set {
                    for &g in &self.g_set {
                        out.push(Cell { index: out.len(), spec: spec.clone(), h, d, g });
                    }
                }
            }
        }
        out
    }

    /// Seed of one run. It depends on what the cell is, not where it sits
    /// in the lattice, so growing the lattice keeps earlier rows valid.
    pub fn run_seed(&self, cell: &Cell, run: usize) -> u64 {
        let kind = EstimatorKind::ALL.iter().position(|&k| k == cell.spec.kind).unwrap_or(0);
        seed::derive(
            self.master_seed,
            &[seed::stream::CELL, kind as u64, cell.h as u64, cell.d as u64, cell.g as u64, run as u64],
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub index: usize,
    pub spec: EstimatorSpec,
    pub h: usize,
    pub d: usize,
    pub g: usize,
}

impl Cell {
    fn key(&self) -> (String, usize, usize, usize) {
        (self.spec.kind.name().to_string(), self.h, self.d, self.g)
    }
}

/// One row of the result table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub dataset: String,
    pub estimator: String,
    pub h: usize,
    pub d: usize,
    #[serde(rename = "G")]
    pub g: usize,
    pub run: usize,
    pub seed: u64,
    pub theta_star_deg: Option<f64>,
    pub error_deg: Option<f64>,
    pub elapsed_ms: Option<f64>,
    pub n_groups: usize,
    pub n_skipped: usize,
    pub flags: String,
}

impl RunRecord {
    pub fn failed(&self) -> bool {
        self.error_deg.is_none()
    }

    fn key(&self) -> (String, usize, usize, usize) {
        (self.estimator.clone(), self.h, self.d, self.g)
    }
}

/// Per-cell summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub estimator: String,
    pub h: usize,
    pub d: usize,
    #[serde(rename = "G")]
    pub g: usize,
    pub runs: usize,
    pub failed: usize,
    pub error_deg: Option<BoxStats>,
    pub elapsed_ms: Option<BoxStats>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentTable {
    pub records: Vec<RunRecord>,
    pub cells: Vec<CellSummary>,
}

impl ExperimentTable {
    fn from_records(cfg: &ExperimentConfig, records: Vec<RunRecord>) -> Result<Self, BenchError> {
        let mut cells = Vec::new();
        for cell in cfg.cells() {
            let rows: Vec<&RunRecord> = records.iter().filter(|r| r.key() == cell.key()).collect();
            let errors: Vec<f64> = rows.iter().filter_map(|r| r.error_deg).collect();
            let times: Vec<f64> = rows.iter().filter(|r| !r.failed()).filter_map(|r| r.elapsed_ms).collect();
            cells.push(CellSummary {
                estimator: cell.spec.kind.name().to_string(),
                h: cell.h,
                d: cell.d,
                g: cell.g,
                runs: rows.len(),
                failed: rows.len() - errors.len(),
                error_deg: if errors.is_empty() { None } else { Some(box_stats(&errors)?) },
                elapsed_ms: if times.is_empty() { None } else { Some(box_stats(&times)?) },
            });
        }
        Ok(Self { records, cells })
    }

    pub fn all_failed(&self) -> bool {
        self.records.iter().all(RunRecord::failed)
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), BenchError> {
        let mut wr = csv::WriterBuilder::new().has_headers(false).from_writer(w);
        wr.write_record(CSV_HEADER.split(','))?;
        for r in &self.records {
            wr.serialize(r)?;
        }
        wr.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String, BenchError> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        Ok(String::from_utf8(buf).expect("csv output is utf-8"))
    }

    pub fn to_json_string(&self) -> Result<String, BenchError> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn render(&self, emit: Emit) -> Result<String, BenchError> {
        match emit {
            Emit::Csv => self.to_csv_string(),
            Emit::Json => self.to_json_string(),
        }
    }
}

/// Read records written by an earlier run.
pub fn read_records(path: &Path, emit: Emit) -> Result<Vec<RunRecord>, BenchError> {
    let text = std::fs::read_to_string(path)?;
    match emit {
        Emit::Csv => {
            let mut rd = csv::Reader::from_reader(text.as_bytes());
            let header: Vec<String> = rd.headers()?.iter().map(str::to_string).collect();
            if header.join(",") != CSV_HEADER {
                return Err(BenchError::Resume(format!("unexpected header in {}", path.display())));
            }
            Ok(rd.deserialize().collect::<Result<_, _>>()?)
        }
        Emit::Json => Ok(serde_json::from_str::<ExperimentTable>(&text)?.records),
    }
}

/// `(reference, test)` for the configured dataset.
pub fn prepare_dataset(dataset: &Dataset) -> Result<(ImageGrid, ImageGrid), ImageError> {
    match dataset {
        Dataset::LenaStyle { source } => Ok((load_image(source, Channel::Red)?, load_image(source, Channel::Green)?)),
        Dataset::MandrillStyle { source } => {
            let gray = load_image(source, Channel::Gray)?;
            let edges = sobel_magnitude(&gray)?;
            Ok((gray, edges))
        }
        Dataset::Custom { reference, test, ref_channel, test_channel, test_filter } => {
            let r = load_image(reference, *ref_channel)?;
            let t = load_image(test, *test_channel)?;
            let t = match test_filter {
                Filter::None => t,
                Filter::Sobel => sobel_magnitude(&t)?,
            };
            Ok((r, t))
        }
    }
}

fn run_one(
    cfg: &ExperimentConfig,
    reference: &ImageGrid,
    test: &ImageGrid,
    cell: &Cell,
    run: usize,
) -> RunRecord {
    let seed = cfg.run_seed(cell, run);
    let params = SweepParams {
        h: cell.h,
        objective: Objective::Entropy(EntropyObjective {
            projection: ProjectionMode::Gaussian { d: cell.d },
            group_size: cell.g,
            spec: cell.spec.clone(),
        }),
        seed,
        max_samples: cfg.max_samples,
    };
    let start = Instant::now();
    let result = sweep(reference, test, &cfg.angles, &params);
    let elapsed = start.elapsed().as_secs_f64() * 1e3;
    let mut rec = RunRecord {
        dataset: cfg.dataset.name().to_string(),
        estimator: cell.spec.kind.name().to_string(),
        h: cell.h,
        d: cell.d,
        g: cell.g,
        run,
        seed,
        theta_star_deg: None,
        error_deg: None,
        elapsed_ms: None,
        n_groups: 0,
        n_skipped: 0,
        flags: String::new(),
    };
    match result {
        Ok(s) => {
            let mut flags = s.flags();
            let invalid = s.invalid_angles();
            if invalid > 0 {
                flags.retain(|f| f != "invalid_angle");
                flags.push(format!("invalid_angles={invalid}"));
            }
            rec.theta_star_deg = Some(s.theta_star);
            rec.error_deg = Some(s.error_deg);
            rec.elapsed_ms = cfg.timing.then(|| (elapsed * 1e3).round() / 1e3);
            rec.n_groups = s.n_groups();
            rec.n_skipped = s.total_skipped();
            rec.flags = flags.join(";");
        }
        Err(e) => rec.flags = format!("failed: {}", failure_reason(&e)),
    }
    rec
}

fn failure_reason(e: &RegistrationError) -> String {
    e.to_string().replace(['\n', '\r'], " ")
}

/// Run the lattice and write the table to `cfg.output` if set.
///
/// With `cfg.resume`, cells whose rows are all present in the existing
/// output (same dataset and seeds) are kept as they are and only the
/// remaining cells run; the table is then rewritten in lattice order.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentTable, BenchError> {
    cfg.validate()?;
    let (reference, test) = prepare_dataset(&cfg.dataset)?;
    run_experiment_on(cfg, &reference, &test)
}

/// [`run_experiment`] with an already prepared pair.
pub fn run_experiment_on(cfg: &ExperimentConfig, reference: &ImageGrid, test: &ImageGrid) -> Result<ExperimentTable, BenchError> {
    cfg.validate()?;
    let cells = cfg.cells();

    let mut done: HashMap<(usize, usize), RunRecord> = HashMap::new();
    if cfg.resume {
        let path = cfg.output.as_ref().expect("validated");
        if path.exists() {
            let previous = read_records(path, cfg.emit)?;
            for cell in &cells {
                let rows: Vec<&RunRecord> = previous
                    .iter()
                    .filter(|r| r.key() == cell.key() && r.dataset == cfg.dataset.name())
                    .collect();
                let complete = (0..cfg.runs).all(|run| {
                    rows.iter().any(|r| r.run == run && r.seed == cfg.run_seed(cell, run))
                });
                if complete {
                    for run in 0..cfg.runs {
                        let r = rows.iter().find(|r| r.run == run).expect("checked above");
                        done.insert((cell.index, run), (*r).clone());
                    }
                }
            }
        }
    }

    let tasks: Vec<(&Cell, usize)> = cells
        .iter()
        .flat_map(|c| (0..cfg.runs).map(move |run| (c, run)))
        .filter(|(c, run)| !done.contains_key(&(c.index, *run)))
        .collect();
    let fresh: Vec<RunRecord> =
        with_workers(cfg.workers, || tasks.par_iter().map(|&(c, run)| run_one(cfg, reference, test, c, run)).collect());
    for ((c, run), rec) in tasks.iter().zip(fresh) {
        done.insert((c.index, *run), rec);
    }

    let records: Vec<RunRecord> = cells
        .iter()
        .flat_map(|c| (0..cfg.runs).map(move |run| (c.index, run)))
        .map(|k| done.remove(&k).expect("every task ran"))
        .collect();
    let table = ExperimentTable::from_records(cfg, records)?;
    if let Some(path) = &cfg.output {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir)?;
        }
        std::fs::write(path, table.render(cfg.emit)?)?;
    }
    Ok(table)
}

/// Timing comparison of the ensemble against a single raw pass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeedupTable {
    pub samples: usize,
    pub raw_dim: usize,
    pub projection: ProjectionMode,
    pub g_set: Vec<usize>,
    pub rows: Vec<SpeedupRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeedupRow {
    pub estimator: String,
    /// `None` when the raw pass failed.
    pub baseline_ms: Option<f64>,
    /// One entry per `G`; `None` when the ensemble failed.
    pub ensemble_ms: Vec<Option<f64>>,
    /// `baseline_ms / ensemble_ms`.
    pub ratios: Vec<Option<f64>>,
}

impl fmt::Display for SpeedupTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "estimator")?;
        for g in &self.g_set {
            write!(f, "\tG={g}")?;
        }
        writeln!(f)?;
        for row in &self.rows {
            write!(f, "{}", row.estimator)?;
            for r in &row.ratios {
                match r {
                    Some(v) => write!(f, "\t{v:.2}")?,
                    None => write!(f, "\t-")?,
                }
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

fn best_of<T>(reps: usize, mut f: impl FnMut() -> Result<T, EnsembleError>) -> Option<f64> {
    // first call also fills calibration caches; keep it out of the timing
    f().ok()?;
    (0..reps.max(1))
        .map(|_| {
            let start = Instant::now();
            f().ok().map(|_| start.elapsed().as_secs_f64() * 1e3)
        })
        .try_fold(f64::INFINITY, |m, t| t.map(|t| m.min(t)))
}

/// Time each estimator on the raw features (identity, one pass over all
/// `T`) and as an ensemble with the given projection for every `G`; each
/// timing is the best of `reps`.
pub fn speedup_ratios(
    x: &FeatureSet,
    estimators: &[EstimatorSpec],
    g_set: &[usize],
    projection: ProjectionMode,
    seed: u64,
    reps: usize,
) -> Result<SpeedupTable, BenchError> {
    let mut rows = Vec::new();
    for spec in estimators {
        let baseline_ms = best_of(reps, || baseline_entropy(x, spec));
        let mut ensemble_ms = Vec::new();
        for (i, &g) in g_set.iter().enumerate() {
            let plan = make_plan(x.len(), g, seed::derive(seed, &[i as u64]))?;
            ensemble_ms.push(best_of(reps, || ensemble_entropy_with(x, &plan, projection, spec)));
        }
        let ratios = ensemble_ms.iter().map(|e| Some(baseline_ms? / (*e)?)).collect();
        rows.push(SpeedupRow { estimator: spec.kind.name().to_string(), baseline_ms, ensemble_ms, ratios });
    }
    Ok(SpeedupTable { samples: x.len(), raw_dim: x.dim(), projection, g_set: g_set.to_vec(), rows })
}

/// [`speedup_ratios`] on the aligned joint features of the configured
/// dataset (first `h`, `max_samples` pixels), projecting to `d`.
pub fn speedup_table(cfg: &ExperimentConfig, d: usize, reps: usize) -> Result<SpeedupTable, BenchError> {
    cfg.validate()?;
    let (reference, test) = prepare_dataset(&cfg.dataset)?;
    let h = cfg.h_set[0];
    if reference.width() < 2 * h + 1 || reference.height() < 2 * h + 1 {
        return Err(BenchError::Config(format!("images too small for h={h}")));
    }
    let region = PixelRect { x0: h, y0: h, x1: reference.width() - 1 - h, y1: reference.height() - 1 - h };
    let x = joint_features(&reference, &test, h, region, cfg.max_samples, cfg.master_seed)?;
    let projection = if d == x.dim() { ProjectionMode::Identity } else { ProjectionMode::Gaussian { d } };
    with_workers(cfg.workers, || speedup_ratios(&x, &cfg.estimators, &cfg.g_set, projection, cfg.master_seed, reps))
}
