use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use rpreg::bench::{
    prepare_dataset, run_experiment, speedup_table, synthetic, BenchError, Dataset, Emit, ExperimentConfig, Filter,
};
use rpreg::ensemble::{with_workers, ProjectionMode};
use rpreg::entropy::{EstimatorKind, EstimatorSpec};
use rpreg::image_io::{Channel, ImageError};
use rpreg::registration::{sweep, AngleGrid, EntropyObjective, Objective, RegistrationError, SweepParams, SweepResult};

#[derive(Parser)]
#[command(name = "rpreg", version, about = "Rotation registration with random-projection ensemble entropy")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sweep one image pair over an angle grid.
    Register(RegisterArgs),
    /// Run an estimator x h x d x G lattice of seeded sweeps.
    Bench(BenchArgs),
    /// Time ensemble estimation against a single raw pass.
    Speedup(SpeedupArgs),
    /// Write synthetic fixture images.
    Synth(SynthArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum DatasetKind {
    LenaStyle,
    MandrillStyle,
    Custom,
}

#[derive(Args)]
struct DataArgs {
    /// Reference image, or the source image for lena_style / mandrill_style.
    #[arg(long = "ref")]
    reference: PathBuf,
    /// Test image (custom only; defaults to the reference file).
    #[arg(long)]
    test: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "custom")]
    dataset: DatasetKind,
    #[arg(long, default_value = "gray")]
    ref_channel: Channel,
    #[arg(long, default_value = "gray")]
    test_channel: Channel,
    /// Filter applied to the test image (custom only).
    #[arg(long, default_value = "none")]
    test_filter: Filter,
}

impl DataArgs {
    fn dataset(&self) -> Dataset {
        match self.dataset {
            DatasetKind::LenaStyle => Dataset::LenaStyle { source: self.reference.clone() },
            DatasetKind::MandrillStyle => Dataset::MandrillStyle { source: self.reference.clone() },
            DatasetKind::Custom => Dataset::Custom {
                reference: self.reference.clone(),
                test: self.test.clone().unwrap_or_else(|| self.reference.clone()),
                ref_channel: self.ref_channel,
                test_channel: self.test_channel,
                test_filter: self.test_filter,
            },
        }
    }
}

#[derive(Args)]
struct EstimatorArgs {
    /// Renyi order for knn_k, knn_1k and mst.
    #[arg(long, default_value_t = rpreg::entropy::DEFAULT_ALPHA)]
    alpha: f64,
    /// Neighbor count (knn_k; knn_1k uses 1..=k).
    #[arg(long, default_value_t = rpreg::entropy::DEFAULT_K)]
    k: usize,
    /// Calibrate the graph-length constants of knn_1k and mst.
    #[arg(long)]
    calibrate: bool,
}

impl EstimatorArgs {
    fn spec(&self, kind: EstimatorKind) -> EstimatorSpec {
        EstimatorSpec::new(kind).with_k(self.k).with_alpha(self.alpha).with_calibration(self.calibrate)
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ObjectiveKind {
    Entropy,
    L1,
    L2,
}

#[derive(Args)]
struct RegisterArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    est: EstimatorArgs,
    #[arg(long, default_value = "entropy")]
    objective: ObjectiveKind,
    #[arg(long, default_value = "knn_k")]
    estimator: EstimatorKind,
    /// Patch radius.
    #[arg(long, default_value_t = 3)]
    h: usize,
    /// Projection dimension; 0 disables projection.
    #[arg(long, default_value_t = 5)]
    d: usize,
    /// Group size.
    #[arg(long = "G", default_value_t = 100)]
    g: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// `paper`, `lo:hi:step` or a comma-separated list, in degrees.
    #[arg(long, default_value = "paper", allow_hyphen_values = true)]
    angles: String,
    #[arg(long)]
    max_samples: Option<usize>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long, default_value = "csv")]
    emit: Emit,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    est: EstimatorArgs,
    #[arg(long, value_delimiter = ',', default_value = "knn_k")]
    estimator: Vec<EstimatorKind>,
    #[arg(long, value_delimiter = ',', default_value = "3")]
    h: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "5")]
    d: Vec<usize>,
    #[arg(long = "G", value_delimiter = ',', default_value = "100")]
    g: Vec<usize>,
    #[arg(long, default_value_t = 10)]
    runs: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "paper", allow_hyphen_values = true)]
    angles: String,
    #[arg(long)]
    max_samples: Option<usize>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long, default_value = "csv")]
    emit: Emit,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Keep complete cells from an existing output file.
    #[arg(long)]
    resume: bool,
    /// Leave elapsed_ms empty so output depends only on the configuration.
    #[arg(long)]
    no_timing: bool,
}

#[derive(Args)]
struct SpeedupArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    est: EstimatorArgs,
    #[arg(long, value_delimiter = ',', default_value = "kdp,knn_k,knn_1k,mst,wknn")]
    estimator: Vec<EstimatorKind>,
    #[arg(long, default_value_t = 3)]
    h: usize,
    #[arg(long, default_value_t = 2)]
    d: usize,
    #[arg(long = "G", value_delimiter = ',', default_value = "20,50,100,1000")]
    g: Vec<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 10_000)]
    max_samples: usize,
    #[arg(long)]
    workers: Option<usize>,
    /// Timed repetitions per entry; the fastest is kept.
    #[arg(long, default_value_t = 3)]
    reps: usize,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 128)]
    size: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

enum Failure {
    Config(String),
    Dataset(String),
    AllFailed,
    Other(String),
}

impl From<BenchError> for Failure {
    fn from(e: BenchError) -> Self {
        match e {
            BenchError::Config(_) | BenchError::EmptyInput => Failure::Config(e.to_string()),
            BenchError::Dataset(_) => Failure::Dataset(e.to_string()),
            BenchError::AllCellsFailed => Failure::AllFailed,
            other => Failure::Other(other.to_string()),
        }
    }
}

impl From<ImageError> for Failure {
    fn from(e: ImageError) -> Self {
        Failure::Dataset(e.to_string())
    }
}

impl From<RegistrationError> for Failure {
    fn from(e: RegistrationError) -> Self {
        match e {
            RegistrationError::EmptyGrid | RegistrationError::InvalidGrid(_) | RegistrationError::InvalidNorm(_) => {
                Failure::Config(e.to_string())
            }
            RegistrationError::SizeMismatch(..) => Failure::Dataset(e.to_string()),
            RegistrationError::NoValidAngle => Failure::AllFailed,
            other => Failure::Other(other.to_string()),
        }
    }
}

fn write_output(out: Option<&PathBuf>, text: &str) -> Result<(), Failure> {
    match out {
        Some(p) => std::fs::write(p, text).map_err(|e| Failure::Other(format!("{}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn sweep_csv(res: &SweepResult) -> String {
    let mut s = String::from("theta_deg,objective,elapsed_ms,n_groups,n_skipped,flags\n");
    for r in &res.per_angle {
        let value = r.value.map(|v| v.to_string()).unwrap_or_default();
        s += &format!("{},{},{:.3},{},{},{}\n", r.theta, value, r.elapsed_ms, r.n_groups, r.n_skipped, r.flags.join(";"));
    }
    s
}

fn register(args: RegisterArgs) -> Result<(), Failure> {
    let grid = AngleGrid::parse(&args.angles)?;
    let spec = args.est.spec(args.estimator);
    spec.validate().map_err(|e| Failure::Config(e.to_string()))?;
    let (reference, test) = prepare_dataset(&args.data.dataset())?;
    let objective = match args.objective {
        ObjectiveKind::Entropy => Objective::Entropy(EntropyObjective {
            projection: if args.d == 0 { ProjectionMode::Identity } else { ProjectionMode::Gaussian { d: args.d } },
            group_size: args.g,
            spec,
        }),
        ObjectiveKind::L1 => Objective::Norm { q: 1 },
        ObjectiveKind::L2 => Objective::Norm { q: 2 },
    };
    let params = SweepParams { h: args.h, objective, seed: args.seed, max_samples: args.max_samples };
    let res = with_workers(args.workers, || sweep(&reference, &test, &grid, &params))?;
    let text = match args.emit {
        Emit::Csv => sweep_csv(&res),
        Emit::Json => serde_json::to_string_pretty(&res).map_err(|e| Failure::Other(e.to_string()))? + "\n",
    };
    write_output(args.out.as_ref(), &text)?;
    eprintln!(
        "theta_star = {} deg, error = {} deg, T = {}, total {:.1} ms",
        res.theta_star,
        res.error_deg,
        res.samples,
        res.total_elapsed_ms()
    );
    Ok(())
}

fn bench(args: BenchArgs) -> Result<(), Failure> {
    let mut cfg = ExperimentConfig::new(args.data.dataset());
    cfg.estimators = args.estimator.iter().map(|&k| args.est.spec(k)).collect();
    cfg.h_set = args.h;
    cfg.d_set = args.d;
    cfg.g_set = args.g;
    cfg.runs = args.runs;
    cfg.master_seed = args.seed;
    cfg.max_samples = args.max_samples;
    cfg.angles = AngleGrid::parse(&args.angles)?;
    cfg.output = args.out.clone();
    cfg.emit = args.emit;
    cfg.workers = args.workers;
    cfg.timing = !args.no_timing;
    cfg.resume = args.resume;
    let table = run_experiment(&cfg)?;
    if cfg.output.is_none() {
        print!("{}", table.render(cfg.emit)?);
    }
    let failed = table.records.iter().filter(|r| r.failed()).count();
    eprintln!("{} runs, {} failed", table.records.len(), failed);
    if table.all_failed() {
        return Err(Failure::AllFailed);
    }
    Ok(())
}

fn speedup(args: SpeedupArgs) -> Result<(), Failure> {
    let mut cfg = ExperimentConfig::new(args.data.dataset());
    cfg.estimators = args.estimator.iter().map(|&k| args.est.spec(k)).collect();
    cfg.h_set = vec![args.h];
    cfg.g_set = args.g;
    cfg.master_seed = args.seed;
    cfg.max_samples = Some(args.max_samples);
    cfg.workers = args.workers;
    let table = speedup_table(&cfg, args.d, args.reps)?;
    println!("T = {}, D = {}, d = {}", table.samples, table.raw_dim, args.d);
    print!("{table}");
    Ok(())
}

fn synth(args: SynthArgs) -> Result<(), Failure> {
    synthetic::write_fixtures(&args.out, args.size, args.seed).map_err(|e| Failure::Other(e.to_string()))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Register(a) => register(a),
        Command::Bench(a) => bench(a),
        Command::Speedup(a) => speedup(a),
        Command::Synth(a) => synth(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let (code, msg) = match f {
                Failure::Config(m) => (2, m),
                Failure::Dataset(m) => (3, m),
                Failure::AllFailed => (4, "every run failed".to_string()),
                Failure::Other(m) => (1, m),
            };
            eprintln!("rpreg: {msg}");
            ExitCode::from(code)
        }
    }
}
