//! Contract tests for the command-line surface: byte-identical reruns with
//! the same seed, CSV round trips through the loader, schema rejection of
//! unknown fields, and exit codes.

use std::path::{Path, PathBuf};
use std::process::Command;

fn binary() -> PathBuf {
    // target/debug/opinionlab next to the test executable
    let mut path = std::env::current_exe().unwrap();
    path.pop();
    path.pop();
    path.join(format!("opinionlab{}", std::env::consts::EXE_SUFFIX))
}

fn write_scenario(dir: &Path) -> PathBuf {
    let doc = r#"
description = "three-agent path, disagreement regime"
seed = 11

[graph]
kind = "path"
n = 3

[model]
d = 1.0
u = 0.44
alpha = 1.0
gamma = -1.0

[init]
random = { dist = "uniform", low = -0.5, high = 0.5 }

[integration]
t_end = 20.0
dt = 0.01
"#;
    let path = dir.join("scenario.toml");
    std::fs::write(&path, doc).unwrap();
    path
}

#[test]
fn run_is_deterministic_and_roundtrips() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = write_scenario(dir.path());

    let run = |out: &Path| {
        let status = Command::new(binary())
            .args([
                "run",
                "--config",
                scenario.to_str().unwrap(),
                "--out",
                out.to_str().unwrap(),
            ])
            .status()
            .expect("spawning the binary");
        assert!(status.success());
    };

    let out1 = dir.path().join("a");
    let out2 = dir.path().join("b");
    run(&out1);
    run(&out2);

    let csv1 = std::fs::read(out1.join("trajectory.csv")).unwrap();
    let csv2 = std::fs::read(out2.join("trajectory.csv")).unwrap();
    assert_eq!(csv1, csv2, "same seed must give byte-identical data");

    // the loader reproduces the file byte for byte
    let table = opinionlab_cli::output::load_csv(&out1.join("trajectory.csv")).unwrap();
    assert_eq!(table.to_csv().as_bytes(), csv1.as_slice());
    assert_eq!(table.columns[0], "t");
    assert!(table.columns.iter().any(|c| c == "x_1"));

    // summary exists and is valid JSON
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out1.join("summary.json")).unwrap())
            .unwrap();
    assert_eq!(summary["seed"], 11);
    assert!(summary["spectral"]["lambda_min"].as_f64().unwrap() < 0.0);
}

#[test]
fn seed_override_changes_the_data() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = write_scenario(dir.path());
    let out1 = dir.path().join("a");
    let out2 = dir.path().join("b");
    for (out, seed) in [(&out1, "11"), (&out2, "12")] {
        let status = Command::new(binary())
            .args([
                "run",
                "--config",
                scenario.to_str().unwrap(),
                "--out",
                out.to_str().unwrap(),
                "--seed",
                seed,
            ])
            .status()
            .unwrap();
        assert!(status.success());
    }
    let csv1 = std::fs::read(out1.join("trajectory.csv")).unwrap();
    let csv2 = std::fs::read(out2.join("trajectory.csv")).unwrap();
    assert_ne!(csv1, csv2);
}

#[test]
fn schema_violations_exit_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    std::fs::write(
        &path,
        "[graph]\nkind = \"path\"\nn = 3\nbogus = 1\n\n[model]\nd = 1.0\nu = 0.5\n",
    )
    .unwrap();
    let output = Command::new(binary())
        .args(["run", "--config", path.to_str().unwrap()])
        .output()
        .unwrap();
    assert!(!output.status.success());
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("bogus") || stderr.contains("unknown field"), "{stderr}");
}

#[test]
fn analyze_reports_threshold_and_refusals() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = write_scenario(dir.path());
    let out = dir.path().join("analysis");
    let output = Command::new(binary())
        .args([
            "analyze",
            "--config",
            scenario.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(output.status.success());
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("prediction.json")).unwrap())
            .unwrap();
    let u_star = report["u_star"].as_f64().unwrap();
    assert!((u_star - 1.0 / (1.0 + 2f64.sqrt())).abs() < 1e-9);
    assert_eq!(report["regime"], "disagreement");

    // mode interaction (gamma = delta) must refuse with a nonzero exit
    let doc = std::fs::read_to_string(&scenario)
        .unwrap()
        .replace("gamma = -1.0", "gamma = 0.5\ndelta = 0.5");
    let path = dir.path().join("mode.toml");
    std::fs::write(&path, doc).unwrap();
    let output = Command::new(binary())
        .args([
            "analyze",
            "--config",
            path.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(!output.status.success());
}

#[test]
fn graph_subcommand_prints_spectral_report() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = write_scenario(dir.path());
    let output = Command::new(binary())
        .args([
            "graph",
            "--config",
            scenario.to_str().unwrap(),
            "--format",
            "json",
        ])
        .output()
        .unwrap();
    assert!(output.status.success());
    let report: serde_json::Value =
        serde_json::from_slice(&output.stdout).unwrap();
    assert_eq!(report["n_agents"], 3);
    let lmax = report["lambda_max"].as_f64().unwrap();
    assert!((lmax - 2f64.sqrt()).abs() < 1e-9);
    assert_eq!(report["strongly_connected"], true);
}

#[test]
fn sweep_writes_branch_data() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = write_scenario(dir.path());
    let out = dir.path().join("sweep");
    let status = Command::new(binary())
        .args([
            "sweep",
            "--config",
            scenario.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
            "--grid",
            "0.38:0.46:0.04",
        ])
        .status()
        .unwrap();
    assert!(status.success());
    let table = opinionlab_cli::output::load_csv(&out.join("branches.csv")).unwrap();
    assert_eq!(
        table.columns,
        vec!["u", "projection", "stable", "residual"]
    );
    assert!(!table.rows.is_empty());

    // a single-point grid yields rows for exactly one parameter value
    let out2 = dir.path().join("sweep_single");
    let status = Command::new(binary())
        .args([
            "sweep",
            "--config",
            scenario.to_str().unwrap(),
            "--out",
            out2.to_str().unwrap(),
            "--grid",
            "0.39:0.39:0.1",
        ])
        .status()
        .unwrap();
    assert!(status.success());
    let table = opinionlab_cli::output::load_csv(&out2.join("branches.csv")).unwrap();
    let u_col = table.column("u").unwrap();
    assert!(!table.rows.is_empty());
    assert!(table.rows.iter().all(|r| r[u_col] == 0.39));
}

#[test]
fn zero_magnitude_inputs_never_cascade() {
    // no drive: the weakly opinionated rest state persists in every trial
    let cells = opinionlab_cli::recipes::cascade_grid(&[0.0], &[0.5, 0.9], 20, 77, 0.05).unwrap();
    for cell in cells {
        assert_eq!(cell.cascades, 0, "cascade at zero input magnitude");
        assert_eq!(cell.frequency, 0.0);
    }
}
