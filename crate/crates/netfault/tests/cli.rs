//! End-to-end tests of the command-line interface: exit codes, emitted
//! artifacts, the trace schema, and byte-level reproducibility.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::time::Instant;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_netfault"))
}

fn scenario_path(file: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../scenarios")
        .join(file)
}

fn run_ok(args: &[&str]) -> Output {
    let out = bin().args(args).output().expect("spawn netfault");
    assert!(
        out.status.success(),
        "netfault {args:?} failed with {:?}\nstderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn exit_code(args: &[&str]) -> (i32, String) {
    let out = bin().args(args).output().expect("spawn netfault");
    (
        out.status.code().expect("exit code"),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

#[test]
fn help_exits_zero() {
    let out = bin().arg("--help").output().expect("spawn netfault");
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    for sub in ["run", "sweep", "plot"] {
        assert!(text.contains(sub), "--help does not mention {sub}");
    }
}

#[test]
fn run_emits_traces_summary_and_plots() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    run_ok(&[
        "run",
        scenario_path("fig1_left.toml").to_str().unwrap(),
        "--out",
        out,
    ]);
    for file in [
        "fig1_left_l1.csv",
        "fig1_left_kalman.csv",
        "fig1_left_summary.json",
        "fig1_left_error.svg",
    ] {
        assert!(dir.path().join(file).exists(), "missing {file}");
    }

    // The trace schema: fixed diagnostic columns, then per-entry blocks.
    let csv = std::fs::read_to_string(dir.path().join("fig1_left_l1.csv")).unwrap();
    let mut lines = csv.lines();
    let header = lines.next().unwrap();
    let mut expected = String::from(
        "k,a1,fault_count,iterations,converged,ambiguous,err_x_l2,err_x_l1,err_f_l1,d_bound,fault_bound",
    );
    for prefix in ["x", "xhat", "f", "fhat"] {
        for i in 0..3 {
            expected.push_str(&format!(",{prefix}_{i}"));
        }
    }
    assert_eq!(header, expected);
    assert_eq!(lines.filter(|l| !l.is_empty()).count(), 41);

    let summary = std::fs::read_to_string(dir.path().join("fig1_left_summary.json")).unwrap();
    let parsed: serde_json::Value = serde_json::from_str(&summary).unwrap();
    assert_eq!(parsed["name"], "fig1_left");
}

#[test]
fn identical_runs_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let scenario = scenario_path("noise_sanity.toml");
    for dir in [&a, &b] {
        run_ok(&[
            "run",
            scenario.to_str().unwrap(),
            "--out",
            dir.path().to_str().unwrap(),
            "--no-plots",
        ]);
    }
    for file in ["noise_sanity_l1_denoise.csv", "noise_sanity_summary.json"] {
        let left = std::fs::read(a.path().join(file)).unwrap();
        let right = std::fs::read(b.path().join(file)).unwrap();
        assert_eq!(left, right, "{file} differs between identical runs");
    }
}

#[test]
fn seed_override_changes_randomized_runs() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let scenario = scenario_path("noise_sanity.toml");
    run_ok(&[
        "run",
        scenario.to_str().unwrap(),
        "--out",
        a.path().to_str().unwrap(),
        "--no-plots",
    ]);
    run_ok(&[
        "run",
        scenario.to_str().unwrap(),
        "--out",
        b.path().to_str().unwrap(),
        "--no-plots",
        "--seed",
        "7",
    ]);
    let left = std::fs::read(a.path().join("noise_sanity_l1_denoise.csv")).unwrap();
    let right = std::fs::read(b.path().join("noise_sanity_l1_denoise.csv")).unwrap();
    assert_ne!(left, right, "a new seed must redraw the noise");
}

#[test]
fn estimator_override_and_shorthand() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    // Kalman only: no l1 trace should appear.
    run_ok(&[
        "run",
        scenario_path("fig1_left.toml").to_str().unwrap(),
        "--out",
        out,
        "--no-plots",
        "--estimator",
        "kalman",
    ]);
    assert!(dir.path().join("fig1_left_kalman.csv").exists());
    assert!(!dir.path().join("fig1_left_l1.csv").exists());

    // --distributed adds the distributed runtime alongside the list.
    run_ok(&[
        "run",
        scenario_path("fig1_left.toml").to_str().unwrap(),
        "--out",
        out,
        "--no-plots",
        "--estimator",
        "l1",
        "--distributed",
        "--lmax",
        "60",
    ]);
    assert!(dir.path().join("fig1_left_l1.csv").exists());
    assert!(dir.path().join("fig1_left_distributed.csv").exists());
}

#[test]
fn sweep_writes_cells() {
    let dir = tempfile::tempdir().unwrap();
    run_ok(&[
        "sweep",
        scenario_path("fig1_left.toml").to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
        "--max-faults",
        "2",
        "--window",
        "30",
        "40",
        "--coord",
        "0",
        "--range",
        "-2",
        "2",
    ]);
    let csv = std::fs::read_to_string(dir.path().join("fig1_left_sweep.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().filter(|l| !l.is_empty()).collect();
    assert_eq!(lines.len(), 3, "header plus one row per cell: {csv}");
    assert!(dir.path().join("fig1_left_sweep.svg").exists());
}

#[test]
fn plot_rerenders_a_trace() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    run_ok(&[
        "run",
        scenario_path("fig1_right.toml").to_str().unwrap(),
        "--out",
        out,
        "--no-plots",
    ]);
    let trace = dir.path().join("fig1_right_l1.csv");
    run_ok(&["plot", trace.to_str().unwrap()]);
    assert!(dir.path().join("fig1_right_l1_error.svg").exists());
    assert!(dir.path().join("fig1_right_l1_states.svg").exists());
}

#[test]
fn bad_inputs_exit_one() {
    // Missing scenario file.
    let (code, stderr) = exit_code(&["run", "does_not_exist.toml"]);
    assert_eq!(code, 1, "stderr: {stderr}");
    assert!(stderr.contains("error"));

    // Unknown estimator name.
    let (code, stderr) = exit_code(&[
        "run",
        scenario_path("fig1_left.toml").to_str().unwrap(),
        "--estimator",
        "magic",
    ]);
    assert_eq!(code, 1);
    assert!(stderr.contains("magic"));

    // Invalid distributed override.
    let (code, _) = exit_code(&[
        "run",
        scenario_path("fig1_left.toml").to_str().unwrap(),
        "--lmax",
        "0",
    ]);
    assert_eq!(code, 1);

    // Unparseable scenario text.
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "nodes = \"three\"").unwrap();
    let (code, _) = exit_code(&["run", bad.to_str().unwrap()]);
    assert_eq!(code, 1);

    // Unknown flags are CLI errors.
    let (code, _) = exit_code(&["run", "--frobnicate"]);
    assert_eq!(code, 1);

    // Plot on a missing trace.
    let (code, _) = exit_code(&["plot", "missing.csv"]);
    assert_eq!(code, 1);
}

#[test]
fn runtime_failures_exit_two() {
    // An output directory nested under a regular file cannot be created.
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("blocker");
    std::fs::write(&blocker, "file").unwrap();
    let out = blocker.join("sub");
    let (code, stderr) = exit_code(&[
        "run",
        scenario_path("fig1_left.toml").to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, 2, "stderr: {stderr}");
    assert!(stderr.contains("error"));

    // A sweep whose window does not fit the horizon is a runtime error.
    let (code, _) = exit_code(&[
        "sweep",
        scenario_path("fig1_left.toml").to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
        "--window",
        "100",
        "300",
        "--coord",
        "0",
    ]);
    assert_eq!(code, 2);
}

/// Every bundled scenario finishes its default run within a minute.
#[test]
fn bundled_scenarios_run_quickly() {
    let dir = tempfile::tempdir().unwrap();
    let scenarios_dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios");
    let mut seen = 0;
    for entry in std::fs::read_dir(scenarios_dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_none_or(|e| e != "toml") {
            continue;
        }
        seen += 1;
        let t0 = Instant::now();
        run_ok(&[
            "run",
            path.to_str().unwrap(),
            "--out",
            dir.path().to_str().unwrap(),
            "--no-plots",
        ]);
        let secs = t0.elapsed().as_secs_f64();
        assert!(
            secs <= 60.0,
            "{} took {secs:.1}s with its default estimator list",
            path.display()
        );
    }
    assert_eq!(seen, 4, "expected the four bundled scenario files");
}
