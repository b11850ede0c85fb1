//! Properties of the default model and the file-level pipeline.

use std::sync::OnceLock;

use wpcoh::coherence::decoherence_decomposition;
use wpcoh::config::RunConfig;
use wpcoh::covariance::ScanAxis;
use wpcoh::pipeline::{self, AnalysisReport, Context, YieldScan};
use wpcoh::propagator::Trajectory;
use wpcoh::units::angstrom_to_bohr;

fn config() -> &'static RunConfig {
    static CFG: OnceLock<RunConfig> = OnceLock::new();
    CFG.get_or_init(RunConfig::default)
}

fn trajectory() -> &'static Trajectory {
    static TRAJ: OnceLock<Trajectory> = OnceLock::new();
    TRAJ.get_or_init(|| pipeline::simulate(config()).unwrap())
}

/// Outermost local maximum of the lower curve inside the control span.
fn barrier_bohr() -> f64 {
    let curve = config().lower_curve().unwrap();
    let (_, maxima) = curve.stationary_points();
    *maxima.last().expect("barrier")
}

#[test]
fn packet_beyond_the_barrier_moves_outward() {
    let traj = trajectory();
    let barrier = barrier_bohr();
    assert!(barrier > angstrom_to_bohr(config().wavepacket.r0_angstrom));
    let r = traj.grid.points();
    let mut last = 0.0;
    for t in [20.0, 40.0, 60.0, 80.0, 95.0] {
        let i = traj.index_at(t).unwrap();
        let (num, den) = traj.chi1[i].iter().zip(&r).filter(|(_, r)| **r > barrier).fold((0.0, 0.0), |(n, d), (c, r)| {
            let p = c.norm_sqr();
            (n + p * r, d + p)
        });
        let mean = num / den;
        assert!(mean > last, "t = {t}: {mean} after {last}");
        last = mean;
    }
}

#[test]
fn overlap_and_contrast_decay() {
    let samples = decoherence_decomposition(trajectory()).unwrap();
    let first = samples[0];
    assert!((first.overlap - 1.0).abs() < 1e-12);
    assert!((first.contrast.unwrap() - 1.0).abs() < 1e-12);
    let at = |t: f64| samples.iter().find(|s| (s.time_fs - t).abs() < 1e-6).unwrap();
    let mid = at(95.0);
    assert!(mid.overlap < 0.9, "{mid:?}");
    assert!(mid.contrast.unwrap() < 0.9, "{mid:?}");
    // Both surfaces carry equal population until the absorber is reached.
    let early = at(25.0);
    assert!((early.population1 - early.population2).abs() < 1e-3, "{early:?}");
}

#[test]
fn hockey_stick_develops_with_time() {
    let traj = trajectory();
    let cfg = config();
    let settings = cfg.hockey_settings();
    let at = |t: f64| pipeline::hockey_at_index(traj, traj.index_at(t).unwrap(), cfg.propagation.density_floor, &settings).unwrap().1;
    assert!(!at(0.0).is_some_and(|m| m.passes));
    let m = at(95.0).expect("fit at 95 fs");
    assert!(m.passes, "{m:?}");
}

#[test]
fn file_pipeline_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = config().clone();
    cfg.scan.phase_points = 12;
    cfg.events.shots_per_phase = 3000;
    let mut ctx = Context::new(cfg, dir.path()).unwrap();
    ctx.plots = false;

    let scans = pipeline::cmd_scan(&ctx, pipeline::ScanChoice::Phase).unwrap();
    let yield_path = ctx.path(&pipeline::yield_file_name(ScanAxis::Phase));
    let back = YieldScan::read(&yield_path).unwrap();
    assert_eq!(back.axis, ScanAxis::Phase);
    assert_eq!(back.phases.len(), 12);
    for (a, b) in back.y.iter().flatten().zip(scans[0].y.iter().flatten()) {
        assert!((a - b).abs() <= 1e-12 * b.abs().max(1e-300), "{a} {b}");
    }

    let events = pipeline::cmd_synth(&ctx, ScanAxis::Phase, Some(&yield_path)).unwrap();
    assert_eq!(pipeline::infer_axis(&events).unwrap(), ScanAxis::Phase);
    let (cov_path, map) = pipeline::cmd_covmap(&ctx, &events, None).unwrap();
    assert_eq!(map.scan_values.len(), 12);
    assert!(map.shots.iter().all(|n| *n == 3000));
    assert_eq!(pipeline::read_covmap(&cov_path).unwrap(), map);

    let reports = pipeline::cmd_analyze(&ctx, &[yield_path, cov_path]).unwrap();
    assert_eq!(reports.len(), 2);
    for r in &reports {
        match r {
            AnalysisReport::Phase { analysis, .. } => assert_eq!(analysis.harmonic, 1),
            AnalysisReport::Delay { .. } => panic!("phase input analysed as delay"),
        }
    }
}

#[test]
fn ensemble_members_are_reproducible() {
    let mut cfg = config().clone();
    cfg.ensemble.members = 2;
    cfg.propagation.total_time_fs = 100.0;
    let a = pipeline::run_ensemble(&cfg).unwrap();
    let b = pipeline::run_ensemble(&cfg).unwrap();
    assert_eq!(a, b);
    assert_ne!(a[0].seed, a[1].seed);
}
