use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn mmloc(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mmloc"))
        .args(args)
        .current_dir(cwd)
        .env("MM_THREADS", "2")
        .output()
        .unwrap()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

/// Small synthetic corpus plus a run config next to it.
fn workspace(dir: &Path) {
    fs::write(
        dir.join("synth.json"),
        r#"{"output_dir": "data", "m": 250, "seed": 2}"#,
    )
    .unwrap();
    let out = mmloc(&["synth", "synth.json"], dir);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    fs::write(
        dir.join("run.json"),
        r#"{
            "floor_plan": "data/floor_plan.json",
            "corpus": "data/corpus.csv",
            "output_dir": "out",
            "d": 6,
            "l": 2,
            "anchors": {"mode": "random", "count": 15},
            "error_vs_n": [5, 10],
            "seed": 1
        }"#,
    )
    .unwrap();
}

#[test]
fn run_writes_bundle_with_manifest() {
    let dir = tempfile::tempdir().unwrap();
    workspace(dir.path());
    let out = mmloc(&["run", "run.json"], dir.path());
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let bundle = dir.path().join("out");
    let manifest = read_json(&bundle.join("manifest.json"));
    assert_eq!(manifest["status"], "ok");
    assert_eq!(manifest["command"], "run");
    let files: Vec<&str> = manifest["files"]
        .as_array()
        .unwrap()
        .iter()
        .map(|f| f.as_str().unwrap())
        .collect();
    for f in &files {
        assert!(bundle.join(f).exists(), "{f} listed but missing");
    }
    for want in ["metrics.json", "estimates.csv", "plot_error_vs_n.csv"] {
        assert!(files.contains(&want), "{want} not listed");
    }
    assert!(!bundle.join("FAILED").exists());
    let metrics = read_json(&bundle.join("metrics.json"));
    assert_eq!(metrics["anchors"], 15);
    assert!(metrics["manifold"]["median"].as_f64().unwrap() < 0.5);
}

#[test]
fn overrides_and_shorthands_apply() {
    let dir = tempfile::tempdir().unwrap();
    workspace(dir.path());
    let out = mmloc(
        &[
            "baseline",
            "run.json",
            "--set",
            "anchors.count=30",
            "--output-dir",
            "other",
            "--seed",
            "9",
        ],
        dir.path(),
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let manifest = read_json(&dir.path().join("other/manifest.json"));
    assert_eq!(manifest["config"]["anchors"]["count"], 30);
    assert_eq!(manifest["config"]["seed"], 9);
    assert!(!dir.path().join("out").exists());
}

#[test]
fn config_errors_exit_2_and_mark_failure() {
    let dir = tempfile::tempdir().unwrap();
    workspace(dir.path());
    // more anchors than devices
    let out = mmloc(
        &["run", "run.json", "--set", "anchors.count=400"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(dir.path().join("out/FAILED").exists());
    assert_eq!(
        read_json(&dir.path().join("out/manifest.json"))["status"],
        "failed"
    );

    let out = mmloc(&["run", "run.json", "--set", "bogus_key=1"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let out = mmloc(&["run", "missing.json"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let out = mmloc(
        &["sweep", "run.json", "--set", "sweep.l_grid=[2,3]"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn bad_data_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    workspace(dir.path());
    let corpus = dir.path().join("data/corpus.csv");
    let mut text = fs::read_to_string(&corpus).unwrap();
    text.push_str("9999,0.5,0.5,1.0\n");
    fs::write(&corpus, text).unwrap();
    let out = mmloc(&["run", "run.json"], dir.path());
    assert_eq!(
        out.status.code(),
        Some(3),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(String::from_utf8_lossy(&out.stderr).contains("line"));
}

#[test]
fn success_clears_stale_failure_marker() {
    let dir = tempfile::tempdir().unwrap();
    workspace(dir.path());
    let out = mmloc(
        &["run", "run.json", "--set", "anchors.count=400"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(2));
    let out = mmloc(&["run", "run.json"], dir.path());
    assert!(out.status.success());
    assert!(!dir.path().join("out/FAILED").exists());
}

#[test]
fn ingest_then_run_on_rssi_table() {
    let dir = tempfile::tempdir().unwrap();
    let mut table = String::from("WAP001,WAP002,WAP003,LONGITUDE,LATITUDE,FLOOR,BUILDINGID\n");
    for i in 0..40 {
        let (x, y) = ((i % 8) as f64, (i / 8) as f64);
        let w = |cx: f64, cy: f64| -40.0 - 6.0 * ((x - cx).powi(2) + (y - cy).powi(2)).sqrt();
        table += &format!(
            "{:.0},{:.0},{:.0},{x},{y},0,0\n",
            w(0.0, 0.0),
            w(7.0, 0.0),
            w(3.0, 4.0)
        );
    }
    fs::write(dir.path().join("raw.csv"), table).unwrap();
    fs::write(
        dir.path().join("ingest.json"),
        r#"{"input": "raw.csv", "output_dir": "corpus"}"#,
    )
    .unwrap();
    let out = mmloc(&["ingest", "ingest.json"], dir.path());
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = fs::read_to_string(dir.path().join("corpus/corpus.csv")).unwrap();
    assert_eq!(text.lines().count(), 41);
    assert!(
        read_json(&dir.path().join("corpus/corpus.csv.json"))["params"]["receivers"].is_array()
    );
}
