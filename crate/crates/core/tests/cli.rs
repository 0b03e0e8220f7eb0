mod common;

use std::process::Command;

fn rpreg() -> Command {
    Command::new(env!("CARGO_BIN_EXE_rpreg"))
}

fn fixture() -> (tempfile::TempDir, String) {
    let dir = tempfile::tempdir().unwrap();
    let p = common::write_rgb(dir.path(), 40, 1);
    let s = p.to_str().unwrap().to_string();
    (dir, s)
}

#[test]
fn register_writes_one_line_per_angle() {
    let (_dir, img) = fixture();
    let out = rpreg()
        .args(["register", "--dataset", "lena-style", "--ref", &img, "--h", "1", "--d", "2", "--G", "50"])
        .args(["--angles", "-1:1:0.5"])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "theta_deg,objective,elapsed_ms,n_groups,n_skipped,flags");
    assert_eq!(lines.len(), 6);
    assert!(lines[1].starts_with("-1,"));
    assert!(String::from_utf8_lossy(&out.stderr).contains("theta_star"));
}

#[test]
fn register_json_and_norm_objective() {
    let (dir, img) = fixture();
    let json = dir.path().join("sweep.json");
    let status = rpreg()
        .args(["register", "--ref", &img, "--objective", "l2", "--h", "1", "--angles", "paper", "--emit", "json"])
        .args(["--out", json.to_str().unwrap()])
        .status()
        .unwrap();
    assert!(status.success());
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(json).unwrap()).unwrap();
    assert_eq!(v["theta_star"], 0.0);
    assert_eq!(v["per_angle"].as_array().unwrap().len(), 57);
}

#[test]
fn bench_csv_is_identical_across_worker_counts() {
    let (dir, img) = fixture();
    let run = |workers: &str| {
        let out = dir.path().join(format!("w{workers}.csv"));
        let status = rpreg()
            .args(["bench", "--dataset", "lena-style", "--ref", &img, "--estimator", "knn_k,mst"])
            .args(["--h", "1", "--d", "1,2", "--G", "50", "--runs", "2", "--angles", "-1:1:0.5", "--seed", "3"])
            .args(["--no-timing", "--workers", workers, "--out", out.to_str().unwrap()])
            .status()
            .unwrap();
        assert!(status.success());
        std::fs::read(out).unwrap()
    };
    let one = run("1");
    assert_eq!(one, run("4"));
    assert_eq!(String::from_utf8(one).unwrap().lines().count(), 1 + 2 * 2 * 2);
}

#[test]
fn bench_resume_matches_fresh_run() {
    let (dir, img) = fixture();
    let args = |out: &str, g: &str| {
        let mut c = rpreg();
        c.args(["bench", "--dataset", "lena-style", "--ref", &img, "--h", "1", "--d", "2", "--G", g])
            .args(["--runs", "2", "--angles", "-1:1:0.5", "--no-timing", "--out", out]);
        c
    };
    let fresh = dir.path().join("fresh.csv");
    let resumed = dir.path().join("resumed.csv");
    let (fresh, resumed) = (fresh.to_str().unwrap(), resumed.to_str().unwrap());
    assert!(args(fresh, "50,80").status().unwrap().success());
    assert!(args(resumed, "80").status().unwrap().success());
    assert!(args(resumed, "50,80").arg("--resume").status().unwrap().success());
    assert_eq!(std::fs::read(fresh).unwrap(), std::fs::read(resumed).unwrap());
}

#[test]
fn exit_codes() {
    let (dir, img) = fixture();
    // config error
    let s = rpreg().args(["bench", "--ref", &img, "--runs", "0"]).status().unwrap();
    assert_eq!(s.code(), Some(2));
    let s = rpreg().args(["register", "--ref", &img, "--angles", "1:0:1"]).status().unwrap();
    assert_eq!(s.code(), Some(2));
    let s = rpreg().args(["bench", "--ref", &img, "--estimator", "nope"]).status().unwrap();
    assert_eq!(s.code(), Some(2));
    // dataset error
    let s = rpreg().args(["bench", "--ref", "/nonexistent.png", "--runs", "1"]).status().unwrap();
    assert_eq!(s.code(), Some(3));
    let gray = dir.path().join("g.pgm");
    rpreg::bench::synthetic::texture(16, 16, 0).write_pgm(&gray).unwrap();
    let s = rpreg().args(["bench", "--dataset", "lena-style", "--ref", gray.to_str().unwrap()]).status().unwrap();
    assert_eq!(s.code(), Some(3));
    // every cell fails: group larger than the sample
    let s = rpreg()
        .args(["bench", "--ref", &img, "--h", "1", "--G", "100000", "--runs", "1", "--angles", "0"])
        .output()
        .unwrap();
    assert_eq!(s.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&s.stdout).contains("failed: "));
}

#[test]
fn synth_writes_fixtures() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("fx");
    let s = rpreg().args(["synth", "--out", out.to_str().unwrap(), "--size", "32"]).status().unwrap();
    assert!(s.success());
    for f in ["texture_rgb.png", "texture_gray.pgm", "gradient.pgm", "noise.pgm"] {
        assert!(out.join(f).exists(), "{f}");
    }
}

#[test]
fn speedup_prints_table() {
    let (_dir, img) = fixture();
    let out = rpreg()
        .args(["speedup", "--ref", &img, "--h", "1", "--estimator", "knn_k,kdp", "--G", "20,50"])
        .args(["--max-samples", "500", "--reps", "1"])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 4);
    assert!(lines[1].starts_with("estimator\tG=20\tG=50"));
}
