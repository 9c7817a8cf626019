use std::path::Path;
use std::process::{Command, Output};

fn ecpsim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ecpsim")).args(args).output().expect("binary runs")
}

fn line_count(path: &Path) -> usize {
    std::fs::read_to_string(path).unwrap().lines().count()
}

#[test]
fn run_writes_one_row_per_step() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("desk.csv");
    let out = ecpsim(&["run", "desk", "--out", csv.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(line_count(&csv), 401);
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("max_penetration"));
    assert!(stdout.contains("mean_iterations"));
}

#[test]
fn step_override_doubles_rows() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("desk.csv");
    let out = ecpsim(&["run", "desk", "--h", "0.005", "--out", csv.to_str().unwrap()]);
    assert!(out.status.success());
    assert_eq!(line_count(&csv), 801);

    let again = dir.path().join("halving.csv");
    let out = ecpsim(&["run", "desk", "--h", "0.005", "--halve-on-failure", "--out", again.to_str().unwrap()]);
    assert!(out.status.success());
    // Halving only engages on failure, so a clean run is unchanged.
    assert_eq!(std::fs::read(&csv).unwrap(), std::fs::read(&again).unwrap());
}

#[test]
fn runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for p in [&a, &b] {
        assert!(ecpsim(&["run", "tbar", "--out", p.to_str().unwrap()]).status.success());
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn several_scenarios_go_to_a_directory() {
    let dir = tempfile::tempdir().unwrap();
    let out = ecpsim(&["run", "resting_cube", "sliding_block", "--jobs", "2", "--out", dir.path().to_str().unwrap()]);
    assert!(out.status.success());
    assert_eq!(line_count(&dir.path().join("resting_cube.csv")), 101);
    assert!(dir.path().join("sliding_block.csv").exists());
}

#[test]
fn input_errors_exit_with_one() {
    assert_eq!(ecpsim(&["run", "no/such/file.toml"]).status.code(), Some(1));
    assert_eq!(ecpsim(&["verify", "desk", "--mu", "-0.1"]).status.code(), Some(1));
    assert_eq!(ecpsim(&["run", "desk", "--h", "0"]).status.code(), Some(1));

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "format_version = 1\n[body]\nmass = -1\n").unwrap();
    let out = ecpsim(&["run", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn modes_reports_runs_and_rejects_empty_csv() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("tbar.csv");
    assert!(ecpsim(&["run", "tbar", "--out", csv.to_str().unwrap()]).status.success());
    let out = ecpsim(&["modes", csv.to_str().unwrap()]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("Surface") && text.contains("Line"), "{text}");

    let empty = dir.path().join("empty.csv");
    std::fs::write(&empty, "").unwrap();
    assert_eq!(ecpsim(&["modes", empty.to_str().unwrap()]).status.code(), Some(1));
}

#[test]
fn verify_passes_on_bundled_scenarios() {
    for name in ["desk", "tbar", "sliding_block", "resting_cube", "spinning_patch"] {
        let out = ecpsim(&["verify", name]);
        assert!(out.status.success(), "{name}: {}", String::from_utf8_lossy(&out.stdout));
    }
}

#[test]
fn oracle_prints_values() {
    let out = ecpsim(&["oracle", "sliding-block", "v0=1", "mu=0.3", "g=9.8", "h=0.01", "steps=3"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let values: Vec<f64> = text.lines().filter(|l| !l.starts_with('#')).map(|l| l.parse().unwrap()).collect();
    assert_eq!(values.len(), 4);
    assert!((values[1] - 0.9706).abs() < 1e-12);

    assert_eq!(ecpsim(&["oracle", "no-such-oracle"]).status.code(), Some(1));
}

#[test]
fn usage_errors_exit_with_one() {
    assert_eq!(ecpsim(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(ecpsim(&["run"]).status.code(), Some(1));
    assert_eq!(ecpsim(&["--help"]).status.code(), Some(0));
}
