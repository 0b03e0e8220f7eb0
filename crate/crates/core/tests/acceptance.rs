//! Acceptance checks, one printed PASS/FAIL line per criterion.
//!
//! Runs without the libtest harness so the lines always appear; the process
//! exits non-zero if any criterion fails.

mod common;

use std::time::Instant;

use common::{channel_pair, normal, uniform, GAUSS_1D};
use rpreg::bench::{run_experiment_on, Dataset, ExperimentConfig};
use rpreg::ensemble::{ensemble_entropy_with, with_workers};
use rpreg::entropy::knn::knn_distances;
use rpreg::entropy::mst::euclidean_mst;
use rpreg::entropy::{kdp_entropy, renyi_knn, renyi_knn_graph, renyi_mst, shannon_knn, shannon_wknn, EntropyError};
use rpreg::registration::{sweep, AngleGrid, EntropyObjective, Objective, SweepParams};
use rpreg::rproj::{gaussian_matrix, project};
use rpreg::{
    baseline_entropy, ensemble_entropy, make_plan, EntropyEstimate, EntropyEstimator, EstimatorKind, EstimatorSpec,
    FeatureSet, GroupPlan, ProjectionMode,
};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn mean_over_seeds(seeds: u64, f: impl Fn(u64) -> f64) -> f64 {
    (0..seeds).map(&f).sum::<f64>() / seeds as f64
}

fn analytic_oracles() -> Outcome {
    let start = Instant::now();
    let t = 5000;
    let mut checks = Vec::new();
    let mut ok = true;
    let mut check = |name: &str, got: f64, want: f64, tol: f64| {
        let good = (got - want).abs() <= tol;
        ok &= good;
        checks.push(format!("{name}={got:.4}{}", if good { "" } else { "!" }));
    };

    check("knn_gauss1", mean_over_seeds(10, |s| shannon_knn(&normal(t, 1, s), 5).unwrap().value), GAUSS_1D, 0.05);
    check("knn_unif2", mean_over_seeds(10, |s| shannon_knn(&uniform(t, 2, 100 + s), 5).unwrap().value), 0.0, 0.07);
    check("kdp_gauss1", mean_over_seeds(10, |s| kdp_entropy(&normal(t, 1, s), 1).unwrap().value), GAUSS_1D, 0.1);
    check("kdp_unif2", mean_over_seeds(10, |s| kdp_entropy(&uniform(t, 2, 100 + s), 1).unwrap().value), 0.0, 0.1);
    let wknn = EstimatorSpec::new(EstimatorKind::Wknn);
    check("wknn_gauss1", mean_over_seeds(10, |s| shannon_wknn(&normal(t, 1, s), &wknn).unwrap().value), GAUSS_1D, 0.05);
    check("wknn_unif2", mean_over_seeds(10, |s| shannon_wknn(&uniform(t, 2, 100 + s), &wknn).unwrap().value), 0.0, 0.05);
    let graph = EstimatorSpec::new(EstimatorKind::Knn1k).with_calibration(true);
    check("knn1k_cal_unif2", mean_over_seeds(10, |s| renyi_knn_graph(&uniform(t, 2, 100 + s), &graph).unwrap().value), 0.0, 0.1);
    let mst = EstimatorSpec::new(EstimatorKind::Mst).with_calibration(true);
    check("mst_cal_unif2", mean_over_seeds(10, |s| renyi_mst(&uniform(t, 2, 100 + s), &mst).unwrap().value), 0.0, 0.1);

    let secs = start.elapsed().as_secs_f64();
    ok &= secs < 30.0;
    outcome(ok, format!("{} in {secs:.1}s (limit 30s)", checks.join(" ")))
}

fn scale_shift() -> Outcome {
    let x = normal(5000, 2, 7);
    let cx = x.map(|v| 2.0 * v);
    let want = 2.0 * 2f64.ln();
    let renyi = EstimatorSpec::new(EstimatorKind::KnnK);
    let graph = EstimatorSpec::new(EstimatorKind::Knn1k);
    let wknn = EstimatorSpec::new(EstimatorKind::Wknn);
    let mst = EstimatorSpec::new(EstimatorKind::Mst);
    let cases: Vec<(&str, f64, f64)> = vec![
        ("shannon_knn", shannon_knn(&cx, 5).unwrap().value - shannon_knn(&x, 5).unwrap().value, 0.05),
        ("knn_k", renyi_knn(&cx, &renyi).unwrap().value - renyi_knn(&x, &renyi).unwrap().value, 0.05),
        ("knn_1k", renyi_knn_graph(&cx, &graph).unwrap().value - renyi_knn_graph(&x, &graph).unwrap().value, 0.05),
        ("wknn", shannon_wknn(&cx, &wknn).unwrap().value - shannon_wknn(&x, &wknn).unwrap().value, 0.05),
        ("kdp", kdp_entropy(&cx, 1).unwrap().value - kdp_entropy(&x, 1).unwrap().value, 0.15),
        ("mst", renyi_mst(&cx, &mst).unwrap().value - renyi_mst(&x, &mst).unwrap().value, 0.15),
    ];
    let pass = cases.iter().all(|(_, diff, tol)| (diff - want).abs() <= *tol);
    let detail = cases.iter().map(|(n, d, _)| format!("{n}={d:.4}")).collect::<Vec<_>>().join(" ");
    outcome(pass, format!("target {want:.4}: {detail}"))
}

fn renyi_limit() -> Outcome {
    let x = normal(5000, 2, 11);
    let spec = EstimatorSpec::new(EstimatorKind::KnnK).with_alpha(0.999);
    let r = renyi_knn(&x, &spec).unwrap().value;
    let s = shannon_knn(&x, 5).unwrap().value;
    outcome((r - s).abs() <= 0.05, format!("renyi(0.999)={r:.4} shannon={s:.4} gap={:.4}", (r - s).abs()))
}

fn jl_distortion() -> Outcome {
    let (t, big_d, d) = (100, 400, 19);
    let x = normal(t, big_d, 2024);
    let dist = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(u, v)| (u - v) * (u - v)).sum::<f64>().sqrt();
    let mut ratios = Vec::new();
    for s in 0..100 {
        let y = project(&gaussian_matrix(d, big_d, s).unwrap(), &x).unwrap();
        for i in 0..t {
            for j in i + 1..t {
                ratios.push(dist(y.row(i), y.row(j)) / (d as f64).sqrt() / dist(x.row(i), x.row(j)));
            }
        }
    }
    let inside = ratios.iter().filter(|r| (0.25..=1.75).contains(*r)).count() as f64 / ratios.len() as f64;
    ratios.sort_by(f64::total_cmp);
    let median = ratios[ratios.len() / 2];
    outcome(
        inside >= 0.99 && (0.9..=1.1).contains(&median),
        format!("{:.2}% within [0.25, 1.75], median {median:.4}", 100.0 * inside),
    )
}

fn registration_precision() -> Outcome {
    let (reference, test) = channel_pair(128, 0);
    let mut cfg = ExperimentConfig::new(Dataset::LenaStyle { source: "texture_rgb.png".into() });
    cfg.d_set = vec![5, 1];
    cfg.timing = false;
    let table = run_experiment_on(&cfg, &reference, &test).unwrap();
    let errors = |d: usize| -> Vec<f64> { table.records.iter().filter(|r| r.d == d).filter_map(|r| r.error_deg).collect() };
    let (e5, e1) = (errors(5), errors(1));
    let good = e5.iter().filter(|&&e| e <= 0.5).count();
    let fmt = |v: &[f64]| v.iter().map(|e| format!("{e}")).collect::<Vec<_>>().join(",");
    outcome(
        good >= 8 && e5.len() == 10,
        format!("d=5: {good}/10 runs with error <= 0.5 [{}]; d=1 (recorded): [{}]", fmt(&e5), fmt(&e1)),
    )
}

fn calibration_shift() -> Outcome {
    let (reference, test) = channel_pair(64, 3);
    let grid = AngleGrid::paper();
    let params = |calibrate: bool| SweepParams {
        h: 1,
        objective: Objective::Entropy(EntropyObjective {
            projection: ProjectionMode::Gaussian { d: 3 },
            group_size: 100,
            spec: EstimatorSpec::new(EstimatorKind::Knn1k).with_calibration(calibrate),
        }),
        seed: 17,
        max_samples: None,
    };
    let raw = sweep(&reference, &test, &grid, &params(false)).unwrap();
    let cal = sweep(&reference, &test, &grid, &params(true)).unwrap();
    let shifts: Vec<f64> =
        raw.per_angle.iter().zip(&cal.per_angle).map(|(a, b)| b.value.unwrap() - a.value.unwrap()).collect();
    let spread = shifts.iter().map(|s| (s - shifts[0]).abs()).fold(0.0, f64::max);
    let skipped = raw.total_skipped() + cal.total_skipped();
    outcome(
        spread <= 1e-9 && raw.theta_star == cal.theta_star && skipped == 0,
        format!(
            "shift {:.6} with spread {spread:.1e} over {} angles; theta* {} vs {}",
            shifts[0],
            shifts.len(),
            raw.theta_star,
            cal.theta_star
        ),
    )
}

/// Returns `a` for the group holding row 0 and `b` for the other.
struct Stub {
    a: f64,
    b: f64,
}

impl EntropyEstimator for Stub {
    fn estimate(&self, x: &FeatureSet) -> Result<EntropyEstimate, EntropyError> {
        let value = if x.rows().any(|r| r[0] == 0.0) { self.a } else { self.b };
        Ok(EntropyEstimate { value, kind: EstimatorKind::KnnK, samples: x.len(), dim: x.dim(), constant_calibrated: false })
    }

    fn min_samples(&self) -> usize {
        1
    }
}

fn ensemble_is_mean() -> Outcome {
    let x = normal(400, 3, 5);
    let mut mismatched = Vec::new();
    for kind in EstimatorKind::ALL {
        let spec = EstimatorSpec::new(kind);
        let plan = GroupPlan::single(x.len(), 9);
        let ens = ensemble_entropy_with(&x, &plan, ProjectionMode::Identity, &spec).unwrap().value;
        let base = baseline_entropy(&x, &spec).unwrap().value;
        if ens.to_bits() != base.to_bits() {
            mismatched.push(format!("{kind}: {ens} vs {base}"));
        }
    }
    let rows = FeatureSet::from_rows(&[[0.0], [1.0], [2.0], [3.0]]).unwrap();
    let (a, b) = (0.1, 0.7);
    let mut stub_ok = true;
    for s in 0..20 {
        let plan = make_plan(4, 2, s).unwrap();
        let got = ensemble_entropy_with(&rows, &plan, ProjectionMode::Identity, &Stub { a, b }).unwrap().value;
        stub_ok &= got == (a + b) / 2.0;
    }
    outcome(
        mismatched.is_empty() && stub_ok,
        format!("identity single group == baseline for all 5 estimators: {}; stub mean exact: {stub_ok}", mismatched.is_empty()),
    )
}

fn best_ms(reps: usize, mut f: impl FnMut()) -> f64 {
    (0..reps)
        .map(|_| {
            let start = Instant::now();
            f();
            start.elapsed().as_secs_f64() * 1e3
        })
        .fold(f64::INFINITY, f64::min)
}

fn grouping_speedup() -> Outcome {
    let x = normal(10_000, 8, 31);
    let grouped = make_plan(x.len(), 100, 1).unwrap();
    let single = make_plan(x.len(), x.len(), 1).unwrap();
    let mut parts = Vec::new();
    let mut ok = true;
    for (kind, need) in [(EstimatorKind::Mst, 5.0), (EstimatorKind::KnnK, 2.0)] {
        let spec = EstimatorSpec::new(kind);
        let run = |plan| {
            ensemble_entropy(&x, plan, 2, &spec).unwrap();
        };
        let g = best_ms(3, || run(&grouped));
        let s = best_ms(3, || run(&single));
        ok &= s / g >= need;
        parts.push(format!("{kind}: single {s:.1}ms grouped {g:.1}ms ratio {:.1} (need {need})", s / g));
    }
    outcome(ok, parts.join("; "))
}

fn determinism() -> Outcome {
    let (reference, test) = channel_pair(48, 8);
    let mut cfg = ExperimentConfig::new(Dataset::LenaStyle { source: "texture_rgb.png".into() });
    cfg.estimators = vec![EstimatorSpec::new(EstimatorKind::KnnK), EstimatorSpec::new(EstimatorKind::Kdp)];
    cfg.h_set = vec![1];
    cfg.d_set = vec![2, 3];
    cfg.g_set = vec![50];
    cfg.runs = 3;
    cfg.master_seed = 99;
    cfg.angles = AngleGrid::parse("-2:2:0.5").unwrap();
    cfg.timing = false;
    let csv = |workers: usize| {
        let mut c = cfg.clone();
        c.workers = Some(workers);
        run_experiment_on(&c, &reference, &test).unwrap().to_csv_string().unwrap()
    };
    let (one, four) = (csv(1), csv(4));
    outcome(one == four, format!("{} bytes, {} rows, workers 1 vs 4 identical: {}", one.len(), one.lines().count() - 1, one == four))
}

fn brute_knn(x: &FeatureSet, k: usize) -> Vec<Vec<f64>> {
    (0..x.len())
        .map(|t| {
            let mut d2: Vec<f64> = (0..x.len())
                .filter(|&j| j != t)
                .map(|j| x.row(t).iter().zip(x.row(j)).map(|(a, b)| (a - b) * (a - b)).sum())
                .collect();
            d2.sort_by(f64::total_cmp);
            d2.truncate(k);
            d2.into_iter().map(f64::sqrt).collect()
        })
        .collect()
}

/// Trees on `n` labelled vertices from Prüfer sequences.
fn prufer_tree(seq: &[usize], n: usize) -> Vec<(usize, usize)> {
    let mut degree = vec![1usize; n];
    for &v in seq {
        degree[v] += 1;
    }
    let mut edges = Vec::with_capacity(n - 1);
    for &v in seq {
        let leaf = (0..n).find(|&u| degree[u] == 1).unwrap();
        edges.push((leaf, v));
        degree[leaf] -= 1;
        degree[v] -= 1;
    }
    let rest: Vec<usize> = (0..n).filter(|&u| degree[u] == 1).collect();
    edges.push((rest[0], rest[1]));
    edges
}

fn sorted_sum(mut lengths: Vec<f64>) -> f64 {
    lengths.sort_by(f64::total_cmp);
    lengths.iter().sum()
}

fn brute_mst(x: &FeatureSet) -> f64 {
    let n = x.len();
    let len = |i: usize, j: usize| x.row(i).iter().zip(x.row(j)).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
    if n == 2 {
        return len(0, 1);
    }
    let mut best = f64::INFINITY;
    let mut seq = vec![0usize; n - 2];
    loop {
        let total = sorted_sum(prufer_tree(&seq, n).into_iter().map(|(i, j)| len(i, j)).collect());
        best = best.min(total);
        // next sequence in base n
        let mut i = 0;
        while i < seq.len() && seq[i] == n - 1 {
            seq[i] = 0;
            i += 1;
        }
        if i == seq.len() {
            return best;
        }
        seq[i] += 1;
    }
}

fn small_oracles() -> Outcome {
    use rand::Rng as _;
    let mut rng = rpreg::seed::rng(4242);
    let mut knn_bad = 0;
    for inst in 0..100 {
        let t = rng.random_range(2..=50);
        let d = rng.random_range(1..=4);
        let k = rng.random_range(1..t);
        let x = uniform(t, d, 10_000 + inst);
        let table = knn_distances(&x, k).unwrap();
        let brute = brute_knn(&x, k);
        if (0..t).any(|i| table.row(i) != brute[i].as_slice()) {
            knn_bad += 1;
        }
    }
    let mut mst_bad = 0;
    for trial in 0..50 {
        let t = 2 + trial as usize % 6;
        let x = uniform(t, 2, 20_000 + trial);
        let got = sorted_sum(euclidean_mst(&x).unwrap().into_iter().map(|e| e.2).collect());
        if got != brute_mst(&x) {
            mst_bad += 1;
        }
    }
    outcome(knn_bad == 0 && mst_bad == 0, format!("knn mismatches {knn_bad}/100, MST mismatches {mst_bad}/50 (T in 2..=7)"))
}

fn main() {
    type Check = fn() -> Outcome;
    let criteria: [(&str, Check); 10] = [
        ("analytic entropy oracles", analytic_oracles),
        ("scale-shift law", scale_shift),
        ("Renyi to Shannon limit", renyi_limit),
        ("JL distortion", jl_distortion),
        ("registration precision", registration_precision),
        ("argmax constant invariance", calibration_shift),
        ("ensemble is the mean", ensemble_is_mean),
        ("grouping speedup", grouping_speedup),
        ("determinism across workers", determinism),
        ("small-instance oracles", small_oracles),
    ];
    let only: Option<usize> = std::env::var("ACCEPTANCE_ONLY").ok().and_then(|v| v.parse().ok());
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        if only.is_some_and(|n| n != i + 1) {
            continue;
        }
        let start = Instant::now();
        let o = with_workers(None, f);
        let verdict = if o.pass { "PASS" } else { "FAIL" };
        println!("criterion {:>2} {verdict} {name}: {} [{:.1}s]", i + 1, o.detail, start.elapsed().as_secs_f64());
        failed += usize::from(!o.pass);
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
