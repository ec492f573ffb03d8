use std::path::Path;
use std::process::{Command, Output};

fn hetmr(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hetmr"))
        .args(args)
        .current_dir(cwd)
        .env_remove("HETMR_WORKERS")
        .output()
        .unwrap()
}

fn ok(out: &Output) {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn simulate_fit_and_summarize() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&hetmr(
        &["simulate", "--seed", "5", "--beta", "0.3,0", "--out", "data.csv"],
        d,
    ));
    assert!(d.join("data.csv.provenance.json").exists());
    ok(&hetmr(&["ivw", "--data", "data.csv", "--out", "ivw.json"], d));
    let ivw: serde_json::Value = serde_json::from_slice(&std::fs::read(d.join("ivw.json")).unwrap()).unwrap();
    assert!(ivw["beta1"]["estimate"].is_f64());
    let fit = [
        "fit",
        "--data",
        "data.csv",
        "--iterations",
        "400",
        "--burn-in",
        "100",
        "--out",
        "draws.csv",
    ];
    ok(&hetmr(&fit, d));
    let header = std::fs::read_to_string(d.join("draws.csv")).unwrap();
    assert!(header.starts_with("beta1,beta2,"));
    let out = hetmr(&["metrics", "--draws", "draws.csv", "--param", "beta2"], d);
    ok(&out);
    let s: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(s["mean"].as_f64().unwrap().abs() < 0.1);
    ok(&hetmr(
        &[
            "contours",
            "--draws",
            "draws.csv",
            "--nx",
            "11",
            "--ny",
            "11",
            "--out",
            "grid.json",
        ],
        d,
    ));
    let grid: serde_json::Value = serde_json::from_slice(&std::fs::read(d.join("grid.json")).unwrap()).unwrap();
    assert_eq!(grid["values"].as_array().unwrap().len(), 121);
}

#[test]
fn partition_fit_writes_subsets_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&hetmr(&["simulate", "--seed", "1", "--out", "data.csv"], d));
    let args = [
        "partition-fit",
        "--data",
        "data.csv",
        "--j",
        "4",
        "--iterations",
        "300",
        "--burn-in",
        "50",
        "--workers",
        "2",
        "--out-dir",
        "pf",
    ];
    ok(&hetmr(&args, d));
    for f in ["subset_0.csv", "subset_3.csv", "aggregated.csv", "manifest.json"] {
        assert!(d.join("pf").join(f).exists(), "{f}");
    }
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(hetmr(&["no-such-command"], d).status.code(), Some(1));
    assert_eq!(hetmr(&["ivw", "--data", "missing.csv"], d).status.code(), Some(1));
    ok(&hetmr(&["simulate", "--out", "data.csv"], d));
    let bad = [
        "fit",
        "--data",
        "data.csv",
        "--iterations",
        "10",
        "--burn-in",
        "10",
        "--out",
        "x.csv",
    ];
    assert_eq!(hetmr(&bad, d).status.code(), Some(1));
    assert_eq!(
        hetmr(
            &["partition-fit", "--data", "data.csv", "--j", "3", "--out-dir", "p"],
            d
        )
        .status
        .code(),
        Some(1)
    );
}

#[test]
fn worker_env_var_is_validated() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_hetmr"))
        .args([
            "reproduce-table2",
            "--replicates",
            "1",
            "--iterations",
            "200",
            "--burn-in",
            "50",
            "--out-dir",
            "t",
        ])
        .current_dir(dir.path())
        .env("HETMR_WORKERS", "0")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    let out = Command::new(env!("CARGO_BIN_EXE_hetmr"))
        .args([
            "reproduce-table2",
            "--replicates",
            "1",
            "--iterations",
            "200",
            "--burn-in",
            "50",
            "--out-dir",
            "t",
        ])
        .current_dir(dir.path())
        .env("HETMR_WORKERS", "2")
        .output()
        .unwrap();
    ok(&out);
    let table = std::fs::read_to_string(dir.path().join("t/table.csv")).unwrap();
    assert_eq!(table.lines().count(), 7);
    assert!(table.lines().nth(1).unwrap().contains("NA"));
}
