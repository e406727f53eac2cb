use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn snhc(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_snhc"))
        .args(args)
        .arg("--set")
        .arg(format!("output_dir={}", dir.display()))
        .env("SNHC_THREADS", "2")
        .output()
        .unwrap()
}

fn csv_rows(path: &Path) -> Vec<csv::StringRecord> {
    csv::Reader::from_path(path).unwrap().records().map(|r| r.unwrap()).collect()
}

fn column(path: &Path, name: &str) -> Vec<String> {
    let mut rdr = csv::Reader::from_path(path).unwrap();
    let idx = rdr.headers().unwrap().iter().position(|h| h == name).unwrap();
    rdr.records().map(|r| r.unwrap()[idx].to_string()).collect()
}

const TP_SCAN: &[&str] = &[
    "scan",
    "--set",
    "regime=TWO_PARAM",
    "--set",
    "budgets.box_resolution=32",
    "--set",
    "budgets.horizon=400",
];

#[test]
fn certify_passes_at_the_saddle_node_canon() {
    let dir = tempfile::tempdir().unwrap();
    let out = snhc(dir.path(), &["certify"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let report: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(report["schema"], "v1");
    assert_eq!(column(&dir.path().join("report.csv"), "status"), vec!["CERTIFIED"]);
    assert!(!csv_rows(&dir.path().join("hypotheses.csv")).is_empty());
}

#[test]
fn certify_flags_a_failing_point() {
    let dir = tempfile::tempdir().unwrap();
    let out = snhc(dir.path(), &["certify", "--set", "map.lambda=0.95"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(column(&dir.path().join("report.csv"), "status"), vec!["UNCERTIFIED"]);
    let hyp = fs::read_to_string(dir.path().join("hypotheses.csv")).unwrap();
    assert!(hyp.lines().any(|l| l.contains("SN") && l.contains("false")));
}

#[test]
fn bad_configuration_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(snhc(dir.path(), &["certify", "--set", "budgets.horizon=0"]).status.code(), Some(2));
    assert_eq!(snhc(dir.path(), &["scan", "--set", "map.colour=1"]).status.code(), Some(2));
    assert_eq!(snhc(dir.path(), &["scan", "--set", "novalue"]).status.code(), Some(2));
    assert_eq!(snhc(dir.path(), &["scan", "--set", "t_grid.count=0"]).status.code(), Some(2));
    let missing = dir.path().join("absent.json");
    assert_eq!(snhc(dir.path(), &["scan", "--config", missing.to_str().unwrap()]).status.code(), Some(2));
    let broken = dir.path().join("broken.json");
    fs::write(&broken, "{ regime: ").unwrap();
    assert_eq!(snhc(dir.path(), &["tree", "--config", broken.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn config_file_and_overrides_compose() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("scenario.json");
    fs::write(
        &cfg,
        r#"{"regime": "TWO_PARAM", "s_grid": {"min": 1e-6, "max": 1e-5, "count": 2, "scale": "log"},
            "budgets": {"box_resolution": 32, "horizon": 400}}"#,
    )
    .unwrap();
    let out = snhc(dir.path(), &["scan", "--config", cfg.to_str().unwrap(), "--set", "s_grid.count=3"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let verdicts = column(&dir.path().join("phase.csv"), "verdict_code");
    assert_eq!(verdicts, vec!["-1", "-1", "-1"]);
    assert!(column(&dir.path().join("report.csv"), "verdict").iter().all(|v| v == "DISJOINT"));
}

#[test]
fn scan_outputs_are_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args: Vec<&str> = TP_SCAN.iter().copied().chain(["--set", "s_grid.values=[1e-6,0,-1e-6]"]).collect();
    for d in [&a, &b] {
        assert_eq!(snhc(d.path(), &args).status.code(), Some(1));
    }
    let status = column(&a.path().join("report.csv"), "status");
    assert_eq!(status, vec!["CERTIFIED", "CERTIFIED", "UNCERTIFIED"]);
    for f in ["report.csv", "phase.csv", "boxes.csv"] {
        let x = fs::read(a.path().join(f)).unwrap();
        assert_eq!(x, fs::read(b.path().join(f)).unwrap(), "{f}");
        assert!(!x.is_empty());
    }
    let verdicts = column(&a.path().join("report.csv"), "verdict");
    assert_eq!(verdicts, vec!["DISJOINT", "TOUCH_AT_S", "MERGED"]);
    let labels = column(&a.path().join("boxes.csv"), "label");
    assert!(labels.iter().any(|l| l == "LAMBDA_PLUS") && labels.iter().any(|l| l == "LAMBDA_MINUS"));
}

#[test]
fn tree_outputs_and_precondition() {
    let dir = tempfile::tempdir().unwrap();
    let out = snhc(dir.path(), &["tree", "--set", "budgets.tree_depth=3", "--set", "budgets.tree_width=32"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let tree: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("tree.json")).unwrap()).unwrap();
    assert_eq!(tree["schema"], "v1");
    let gaps: Vec<f64> = column(&dir.path().join("density.csv"), "density_gap").iter().map(|g| g.parse().unwrap()).collect();
    assert_eq!(gaps.len(), 3);
    assert!(gaps.windows(2).all(|w| w[1] < w[0]));
    assert!(csv_rows(&dir.path().join("tree.csv")).len() > 32);

    let failing = snhc(dir.path(), &["tree", "--set", "map.lambda=0.95"]);
    assert_eq!(failing.status.code(), Some(1));
    let hyperbolic = snhc(dir.path(), &["tree", "--set", "regime=HYPERBOLIC"]);
    assert_eq!(hyperbolic.status.code(), Some(1));
}
