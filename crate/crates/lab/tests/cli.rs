use std::fs;
use std::path::Path;
use std::process::Command as Process;

fn hmflab(args: &[&str]) -> i32 {
    Process::new(env!("CARGO_BIN_EXE_hmflab")).args(args).output().expect("spawn").status.code().expect("exit code")
}

fn scenario(dir: &Path, text: &str) -> String {
    let p = dir.join("scenario.cfg");
    fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

fn column(csv: &str, name: &str) -> Vec<f64> {
    let mut lines = csv.lines();
    let k = lines.next().unwrap().split(',').position(|c| c == name).expect("column");
    lines.map(|l| l.split(',').nth(k).unwrap().parse().unwrap()).collect()
}

#[test]
fn missing_gamma_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    assert_eq!(hmflab(&["simulate", "--out", out.to_str().unwrap()]), 1);
    assert_eq!(hmf_lab::run(["hmflab", "constants", "--out", out.to_str().unwrap()]), 1);
}

#[test]
fn config_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let cfg = scenario(dir.path(), "gamma = 2\nno_such_key = 3\n");
    assert_eq!(hmflab(&["constants", "--config", &cfg, "--out", out.to_str().unwrap()]), 1);
    assert_eq!(hmflab(&["no-such-command"]), 1);
    assert_eq!(hmflab(&["constants", "--gamma", "0.5", "--out", out.to_str().unwrap()]), 1);
    let missing = dir.path().join("absent.cfg");
    assert_eq!(hmflab(&["constants", "--config", missing.to_str().unwrap()]), 1);
    assert!(!out.exists());
}

#[test]
fn numerical_failure_exits_two() {
    // p0 = 0 puts the log-integral exponent gap outside its domain.
    let dir = tempfile::tempdir().unwrap();
    let cfg = scenario(dir.path(), "p0 = 0\n");
    let out = dir.path().join("out");
    assert_eq!(hmflab(&["check-integrals", "--config", &cfg, "--out", out.to_str().unwrap()]), 2);
}

#[test]
fn help_and_version_exit_zero() {
    assert_eq!(hmflab(&["--help"]), 0);
    assert_eq!(hmflab(&["--version"]), 0);
}

#[test]
fn constants_match_closed_forms() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    assert_eq!(hmflab(&["constants", "--gamma", "2,4,6", "--out", out.to_str().unwrap()]), 0);
    let csv = fs::read_to_string(out.join("constants.csv")).unwrap();
    let c = column(&csv, "c_gamma");
    for (got, want) in c.iter().zip([0.25, 1.0 / 16.0, 1.0 / 32.0]) {
        assert!((got / want - 1.0).abs() < 1e-10, "{got} vs {want}");
    }
    let manifest = fs::read_to_string(out.join("manifest.txt")).unwrap();
    assert!(manifest.contains("command = constants") && manifest.contains("constants.csv"));
    assert!(fs::read_to_string(out.join("timing.txt")).unwrap().starts_with("wall_time_seconds"));
}

#[test]
fn empty_result_set_is_header_only() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = scenario(dir.path(), "log_times =\n");
    let out = dir.path().join("out");
    assert_eq!(hmflab(&["check-integrals", "--config", &cfg, "--out", out.to_str().unwrap()]), 0);
    let csv = fs::read_to_string(out.join("log_integrals.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1, "{csv}");
}

#[test]
fn short_simulation_dissipates_energy_and_summarises() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = scenario(dir.path(), "gamma = 2\nhorizon = 1e3\nnodes = 600\n");
    let out = dir.path().join("out");
    assert_eq!(hmflab(&["simulate", "--config", &cfg, "--out", out.to_str().unwrap()]), 0);
    let csv = fs::read_to_string(out.join("timeseries_g2.csv")).unwrap();
    let energy = column(&csv, "energy");
    assert!(energy.len() > 10);
    assert!(energy.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-13)), "energy increased");
    assert!(out.join("timeseries_g2.dat").exists() && out.join("snapshots_g2.csv").exists());
    let summary = fs::read_to_string(out.join("summary.md")).unwrap();
    assert!(summary.contains("| regime | gamma | ||v_r||_inf | mu(t) |"), "{summary}");
    let verdict = fs::read_to_string(out.join("verdict.csv")).unwrap();
    assert_eq!(verdict.lines().count(), 2);
}

fn files_except_timing(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.file_name().unwrap() != "timing.txt")
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    v.sort();
    v
}

#[test]
fn repeated_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = scenario(dir.path(), "gamma = 1.5, 3\nhorizon = 1e3\nnodes = 400\nreading = both\n");
    for cmd in ["simulate", "constraints", "constants"] {
        let a = dir.path().join(format!("{cmd}-a"));
        let b = dir.path().join(format!("{cmd}-b"));
        assert_eq!(hmflab(&[cmd, "--config", &cfg, "--out", a.to_str().unwrap()]), 0);
        assert_eq!(hmflab(&[cmd, "--config", &cfg, "--out", b.to_str().unwrap()]), 0);
        let (fa, fb) = (files_except_timing(&a), files_except_timing(&b));
        assert!(!fa.is_empty());
        assert!(fa == fb, "{cmd} outputs differ");
    }
}
