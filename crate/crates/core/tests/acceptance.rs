//! Acceptance criteria at their stated tolerances, one test each. Every
//! test prints a single PASS/FAIL line that survives output capture.

use std::io::Write;
use std::sync::{Mutex, OnceLock};
use std::time::Instant;

use wpcoh::acceptance::{self, Outcome};
use wpcoh::alloc::PeakAlloc;
use wpcoh::config::RunConfig;
use wpcoh::pipeline::{self, Context};
use wpcoh::propagator::Trajectory;

#[global_allocator]
static ALLOC: PeakAlloc = PeakAlloc;

// Timing- and memory-sensitive checks must not overlap.
static SERIAL: Mutex<()> = Mutex::new(());

fn config() -> &'static RunConfig {
    static CFG: OnceLock<RunConfig> = OnceLock::new();
    CFG.get_or_init(RunConfig::default)
}

fn trajectory() -> &'static Trajectory {
    static TRAJ: OnceLock<Trajectory> = OnceLock::new();
    TRAJ.get_or_init(|| pipeline::simulate(config()).expect("default propagation"))
}

fn check(f: impl FnOnce() -> Outcome) {
    let guard = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let o = f();
    drop(guard);
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "{o}");
    let _ = out.flush();
    assert!(o.passed, "{o}");
}

#[test]
fn criterion_01_unitarity() {
    check(acceptance::unitarity);
}

#[test]
fn criterion_02_analytic_oracles() {
    check(acceptance::analytic_oracles);
}

#[test]
fn criterion_03_constant_offset_dephasing() {
    check(|| acceptance::constant_offset(config()));
}

#[test]
fn criterion_04_hockey_stick_and_persistence() {
    let traj = trajectory();
    check(|| acceptance::hockey_stick(config(), traj).0);
}

#[test]
fn criterion_05_harmonic_count() {
    let traj = trajectory();
    check(|| acceptance::harmonic_count(config(), traj));
}

#[test]
fn criterion_06_bandwidth_scaling() {
    check(|| acceptance::bandwidth_scaling(config()));
}

#[test]
fn criterion_07_mask_properties() {
    check(|| acceptance::mask_properties(config()));
}

#[test]
fn criterion_08_covariance_matches_coincidence() {
    let traj = trajectory();
    check(|| acceptance::covariance_checks(config(), traj));
}

#[test]
fn criterion_09_fourier_recovery() {
    let traj = trajectory();
    let dir = tempfile::tempdir().unwrap();
    check(|| acceptance::fourier_recovery(config(), traj, dir.path()));
}

#[test]
fn criterion_10_end_to_end_phase() {
    let traj = trajectory();
    check(|| acceptance::end_to_end_phase(config(), traj));
}

#[test]
fn criterion_11_determinism_and_scale() {
    let traj = trajectory();
    let dir = tempfile::tempdir().unwrap();
    check(|| {
        let started = Instant::now();
        let mut ctx = Context::new(config().clone(), dir.path()).unwrap();
        ctx.plots = false;
        if let Err(e) = pipeline::data_chain(&ctx) {
            return Outcome {
                id: 11,
                title: "determinism and scale",
                passed: false,
                detail: format!("data chain failed: {e}"),
                seconds: started.elapsed().as_secs_f64(),
            };
        }
        acceptance::determinism_and_scale(&ctx, traj, started)
    });
}
