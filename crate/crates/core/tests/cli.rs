use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use mccgr::matrix::{load_csv, load_labels};

fn mccgr(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mccgr"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn synth_files(dir: &Path) {
    let out = mccgr(
        &[
            "synth", "--classes", "3", "--per-class", "6", "--dim", "15", "--noise", "gaussian",
            "--seed", "4", "--out", "x.csv", "--out-labels", "y.csv",
        ],
        dir,
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn synth_graph_factorize_eval_pipeline() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    synth_files(dir);
    let x = load_csv(dir.join("x.csv")).unwrap();
    assert_eq!(x.shape(), (15, 18));
    assert_eq!(load_labels(dir.join("y.csv")).unwrap().len(), 18);

    let out = mccgr(&["graph", "--input", "x.csv", "--knn", "3", "--knn-mode", "symmetrized", "--out", "a.csv"], dir);
    assert_eq!(code(&out), 0);
    let a = load_csv(dir.join("a.csv")).unwrap();
    assert_eq!(a.shape(), (18, 18));
    assert_eq!(a, a.transpose());

    let out = mccgr(
        &[
            "factorize", "--input", "x.csv", "--labels", "y.csv", "--variant", "mccgr", "--k", "3",
            "--alpha", "10", "--theta", "1", "--knn", "3", "--max-iter", "80", "--tol", "1e-6",
            "--seed", "5", "--out-h", "h.csv", "--out-w", "w.csv", "--trace", "trace.csv",
        ],
        dir,
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let summary: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(summary["variant"], "mccgr");
    let acc = summary["accuracy"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&acc));
    assert_eq!(load_csv(dir.join("h.csv")).unwrap().shape(), (15, 3));
    assert_eq!(load_csv(dir.join("w.csv")).unwrap().shape(), (3, 18));
    let trace = fs::read_to_string(dir.join("trace.csv")).unwrap();
    let iterations = summary["iterations"].as_u64().unwrap() as usize;
    assert_eq!(trace.lines().count(), iterations + 1);
    assert_eq!(trace.lines().next(), Some("iteration,objective"));

    let out = mccgr(&["eval", "--w", "w.csv", "--labels", "y.csv", "--k", "3", "--seed", "1", "--out", "report.json"], dir);
    assert_eq!(code(&out), 0);
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.join("report.json")).unwrap()).unwrap();
    for key in ["accuracy", "nmi", "matching", "confusion"] {
        assert!(report.get(key).is_some(), "missing {key}");
    }
    assert_eq!(report["confusion"].as_array().unwrap().len(), 3);
}

#[test]
fn factorize_is_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    synth_files(dir);
    for out in ["w1.csv", "w2.csv"] {
        let o = mccgr(&["factorize", "--input", "x.csv", "--variant", "mcc", "--k", "2", "--max-iter", "30", "--out-w", out], dir);
        assert_eq!(code(&o), 0);
    }
    assert_eq!(fs::read(dir.join("w1.csv")).unwrap(), fs::read(dir.join("w2.csv")).unwrap());
}

#[test]
fn experiment_writes_tables() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    synth_files(dir);
    fs::write(
        dir.join("spec.json"),
        r#"{"features": "x.csv", "labels": "y.csv", "k_range": [2, 3],
            "variants": [{"variant": "l2"}, {"variant": "mccgr", "label": "mccgr_a10", "alpha": 10}],
            "repeats": 2, "max_iter": 40, "knn": 3, "alpha_sweep": [10, 1],
            "output_dir": "results"}"#,
    )
    .unwrap();
    let out = mccgr(&["experiment", "--spec", "spec.json"], dir);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let results = dir.join("results");
    let acc = fs::read_to_string(results.join("accuracy.csv")).unwrap();
    assert_eq!(acc.lines().next(), Some("k,l2,mccgr_a10"));
    assert_eq!(acc.lines().count(), 3);
    assert!(results.join("nmi.csv").exists());
    assert!(results.join("summary.json").exists());
    assert!(results.join("traces/mccgr_a10_k3_r1.csv").exists());
    let sweep = fs::read_to_string(results.join("alpha_sweep.csv")).unwrap();
    let alphas: Vec<&str> = sweep.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(alphas, ["1", "10"]);
}

#[test]
fn usage_errors_exit_1() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    assert_eq!(code(&mccgr(&["factorize", "--k", "2"], dir)), 1);
    assert_eq!(code(&mccgr(&["factorize", "--input", "x.csv", "--k", "2", "--variant", "pca"], dir)), 1);
    assert_eq!(code(&mccgr(&["bogus"], dir)), 1);
    assert_eq!(code(&mccgr(&["--help"], dir)), 0);
    synth_files(dir);
    // k = 0 is a bad flag value, not bad data.
    assert_eq!(code(&mccgr(&["factorize", "--input", "x.csv", "--k", "0"], dir)), 1);
    fs::write(dir.join("spec.json"), r#"{"features": "x.csv", "labels": "y.csv", "k_range": [2], "variants": [{"variant": "l2"}]}"#).unwrap();
    assert_eq!(code(&mccgr(&["experiment", "--spec", "spec.json"], dir)), 1);
}

#[test]
fn data_errors_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    assert_eq!(code(&mccgr(&["graph", "--input", "missing.csv", "--out", "a.csv"], dir)), 2);
    fs::write(dir.join("neg.csv"), "1,2\n-3,4\n").unwrap();
    let out = mccgr(&["factorize", "--input", "neg.csv", "--k", "1"], dir);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("negative"));
    fs::write(dir.join("x.csv"), "1,2,3\n4,5,6\n").unwrap();
    fs::write(dir.join("y.csv"), "0\n1\n").unwrap();
    assert_eq!(code(&mccgr(&["eval", "--w", "x.csv", "--labels", "y.csv", "--k", "2"], dir)), 2);
    // A 5-neighbour graph over three samples.
    assert_eq!(code(&mccgr(&["graph", "--input", "x.csv", "--knn", "5", "--out", "a.csv"], dir)), 2);
    fs::write(dir.join("spec.json"), "{not json").unwrap();
    assert_eq!(code(&mccgr(&["experiment", "--spec", "spec.json", "--out-dir", "o"], dir)), 2);
}

#[test]
fn numerical_failure_exits_3() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    // Squared residuals overflow to infinity.
    fs::write(dir.join("huge.csv"), "1e300,2e300\n3e300,1e300\n").unwrap();
    let out = mccgr(&["factorize", "--input", "huge.csv", "--variant", "l2", "--k", "1"], dir);
    assert_eq!(code(&out), 3, "{}", String::from_utf8_lossy(&out.stderr));
}
