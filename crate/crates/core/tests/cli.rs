//! The `gtraj` binary end to end: provenance, re-runs from embedded configs,
//! worker independence and exit codes.

use std::path::Path;
use std::process::Command;

use gtraj::experiments::ExperimentOutput;

fn gtraj(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_gtraj")).args(args).output().expect("binary runs")
}

fn run_ok(args: &[&str]) {
    let out = gtraj(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
}

fn read(p: &Path) -> String {
    std::fs::read_to_string(p).unwrap()
}

fn data_of(text: &str) -> Vec<gtraj::experiments::Table> {
    ExperimentOutput::parse(text).unwrap().tables
}

#[test]
fn rerun_from_embedded_config_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("first.csv");
    let again = dir.path().join("again.csv");
    let f = first.to_str().unwrap();
    run_ok(&["single-traj", "--t-max", "3", "--n-times", "301", "--n-levels", "60", "--seed", "11", "--out", f]);
    run_ok(&["single-traj", "--config", f, "--out", again.to_str().unwrap()]);
    assert_eq!(read(&first), read(&again));

    let parsed = ExperimentOutput::parse(&read(&first)).unwrap();
    assert_eq!(parsed.meta.seed, 11);
    assert!(parsed.meta.version.starts_with(env!("CARGO_PKG_VERSION")));
    let t = parsed.table("trajectories").unwrap();
    assert_eq!(t.columns, ["t", "n_exact", "jumps_exact", "n_xp", "jumps_xp"]);
    assert_eq!(t.rows.len(), 301);
}

#[test]
fn json_output_reruns_to_the_same_values() {
    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("first.json");
    let f = first.to_str().unwrap();
    run_ok(&["oracle", "--f-values", "1.8,2.2", "--oracle-levels", "60", "--format", "json", "--out", f]);
    let again = gtraj(&["oracle", "--config", f, "--format", "csv"]);
    assert!(again.status.success());
    assert_eq!(data_of(&read(&first)), data_of(&String::from_utf8(again.stdout).unwrap()));
}

#[test]
fn serial_and_parallel_runs_agree() {
    let dir = tempfile::tempdir().unwrap();
    let mut tables = Vec::new();
    for workers in ["1", "3"] {
        let path = dir.path().join(format!("w{workers}.csv"));
        run_ok(&[
            "phase-diffusion",
            "--preset",
            "desk",
            "--alpha",
            "3",
            "--n-levels",
            "60",
            "--t-max",
            "0.05",
            "--n-times",
            "6",
            "--n-traj",
            "16",
            "--n-traj-twa",
            "64",
            "--workers",
            workers,
            "--out",
            path.to_str().unwrap(),
        ]);
        tables.push(data_of(&read(&path)));
    }
    assert_eq!(tables[0], tables[1]);
    assert_eq!(tables[0].len(), 8, "7 ensembles plus the master-equation reference");
}

#[test]
fn exit_codes_follow_the_error_kind() {
    // malformed config file: line-precise message, exit 2
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{\n  \"kind\": \"oracle\",\n  \"f_values\": [1.0,]\n}\n").unwrap();
    let out = gtraj(&["oracle", "--config", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 3"));

    let out = gtraj(&["single-traj", "--scheme", "pc,het"]);
    assert_eq!(out.status.code(), Some(2));

    // a coherent amplitude of 5 does not fit in 20 levels
    let out = gtraj(&["phase-diffusion", "--method", "exact", "--scheme", "pc", "--alpha", "5", "--n-levels", "20", "--n-traj", "2", "--t-max", "0.01", "--reference", "false"]);
    assert_eq!(out.status.code(), Some(4), "{}", String::from_utf8_lossy(&out.stderr));

    // every NΘ trajectory below one photon aborts; the failure budget is exceeded
    let out = gtraj(&[
        "phase-diffusion", "--method", "ntheta", "--scheme", "pc", "--alpha", "1.1", "--u", "0", "--delta", "0",
        "--n-traj", "20", "--t-max", "2", "--n-times", "3", "--reference", "false",
    ]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn print_config_is_a_loadable_config() {
    let out = gtraj(&["wigner", "--preset", "desk", "--print-config"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let cfg = gtraj::experiments::ExperimentConfig::from_json(&text).unwrap();
    assert_eq!(cfg.kind, gtraj::experiments::ExperimentKind::Wigner);
    assert_eq!(cfg.wigner_points, 61);
}
