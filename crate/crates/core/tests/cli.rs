//! The `wpcoh` binary: exit codes, error messages and the full reproduce run.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use wpcoh::config::RunConfig;

fn wpcoh(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wpcoh"))
        .args(args)
        .arg("--out")
        .arg(dir.join("out"))
        .env("RUST_LOG", "warn")
        .output()
        .expect("run wpcoh")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn default_config_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let o = wpcoh(&["default-config"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let text = String::from_utf8(o.stdout).unwrap();
    assert_eq!(RunConfig::from_toml_str(&text).unwrap(), RunConfig::default());
}

#[test]
fn unknown_key_is_rejected_by_name() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "[grid]\npointz = 512\n").unwrap();
    let o = wpcoh(&["--config", cfg.to_str().unwrap(), "propagate"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("pointz"), "{}", stderr(&o));
}

#[test]
fn invalid_value_is_rejected_by_name() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "[propagation]\ndt_au = -1.0\n").unwrap();
    let o = wpcoh(&["--config", cfg.to_str().unwrap(), "scan"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("dt_au"), "{}", stderr(&o));
}

#[test]
fn inconsistent_sections_name_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "[propagation]\ntotal_time_fs = 100.0\n").unwrap();
    let o = wpcoh(&["--config", cfg.to_str().unwrap(), "propagate"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("scan.delay_stop_fs"), "{}", stderr(&o));
}

#[test]
fn missing_input_is_an_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = wpcoh(&["covmap", "no_such_file.csv"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    let o = wpcoh(&["analyze", "no_such_file.csv"], dir.path());
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn propagate_writes_tables_and_figures() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("short.toml");
    fs::write(&cfg, "[propagation]\ntotal_time_fs = 100.0\n[scan]\ndelay_stop_fs = 100.0\n").unwrap();
    let o = wpcoh(&["--config", cfg.to_str().unwrap(), "--seed", "9", "propagate"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let out = dir.path().join("out");
    for f in ["potentials.csv", "phase_difference.csv", "hockey.csv", "decoherence.csv", "trajectory_t095.0fs.csv", "phase_difference.svg"] {
        assert!(out.join(f).is_file(), "{f}");
    }
    let stdout = String::from_utf8(o.stdout).unwrap();
    assert!(stdout.lines().any(|l| l.contains("95.0 fs") && l.contains("hockey stick")), "{stdout}");
}

#[test]
fn reproduce_passes_every_criterion() {
    let dir = tempfile::tempdir().unwrap();
    let o = wpcoh(&["reproduce"], dir.path());
    let stdout = String::from_utf8_lossy(&o.stdout).into_owned();
    assert!(o.status.success(), "{stdout}\n{}", stderr(&o));
    let summary = fs::read_to_string(dir.path().join("out/summary.txt")).unwrap();
    assert!(summary.contains("11/11 criteria passed"), "{summary}");
    for f in ["ensemble.csv", "yield_delay.csv", "yield_phase.csv", "covmap_delay.csv", "covmap_phase.csv", "spectrum_covmap_delay.csv"] {
        assert!(dir.path().join("out").join(f).is_file(), "{f}");
    }
}
