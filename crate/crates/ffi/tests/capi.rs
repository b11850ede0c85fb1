//! The C ABI exercised from Rust the way a C caller would use it.

use std::f64::consts::PI;
use std::ffi::{CStr, CString};
use std::ptr;

use wpcoh::covariance::ScanAxis;
use wpcoh::pipeline::{self, Context};
use wpcoh_ffi::*;

fn last_error() -> String {
    let p = wpcoh_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn version_is_a_c_string() {
    let v = unsafe { CStr::from_ptr(wpcoh_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn null_pointers_and_bad_config_report_errors() {
    unsafe {
        assert_eq!(wpcoh_config_default(ptr::null_mut()), WpcohStatus::NullPointer);
        assert!(last_error().contains("out_config"));
        let mut cfg = ptr::null_mut();
        let bad = CString::new("[grid]\npointz = 3\n").unwrap();
        assert_eq!(wpcoh_config_from_toml(bad.as_ptr(), &mut cfg), WpcohStatus::InvalidArgument);
        assert!(cfg.is_null());
        assert!(last_error().contains("pointz"));
        let good = CString::new("seed = 4\n").unwrap();
        assert_eq!(wpcoh_config_from_toml(good.as_ptr(), &mut cfg), WpcohStatus::Ok);
        assert!(wpcoh_last_error_message().is_null());
        wpcoh_config_free(cfg);
        wpcoh_config_free(ptr::null_mut());
    }
}

#[test]
fn potential_handle() {
    let r = [2.4, 3.0, 3.8, 4.6];
    let v = [0.0, -0.9, -0.6, -2.5];
    unsafe {
        let mut p = ptr::null_mut();
        assert_eq!(wpcoh_potential_new(r.as_ptr(), v.as_ptr(), 4, &mut p), WpcohStatus::Ok);
        let mut out = [0.0; 4];
        assert_eq!(wpcoh_potential_eval(p, r.as_ptr(), 4, out.as_mut_ptr()), WpcohStatus::Ok);
        for (a, b) in out.iter().zip(v) {
            assert!((a - b).abs() < 1e-12);
        }
        wpcoh_potential_free(p);
        let mut q = ptr::null_mut();
        assert_eq!(wpcoh_potential_new(r.as_ptr(), v.as_ptr(), 2, &mut q), WpcohStatus::InvalidArgument);
        assert!(last_error().contains("control_points"));
    }
}

#[test]
fn shaper_functions() {
    unsafe {
        let (mut re, mut im) = (0.0, 0.0);
        assert_eq!(wpcoh_shaper_mask(0.375, 1.0, 0.5, 95.0, 0.0, 0.375, &mut re, &mut im), WpcohStatus::Ok);
        assert!((re - 1.5).abs() < 1e-12 && im.abs() < 1e-12);
        assert_eq!(wpcoh_shaper_mask(0.375, 1.0, -0.5, 95.0, 0.0, 0.375, &mut re, &mut im), WpcohStatus::InvalidArgument);
        let mut phi = 0.0;
        assert_eq!(wpcoh_controllable_phase(0.3, 0.25, 2.0, &mut phi), WpcohStatus::Ok);
        assert!((phi - (0.3 - PI)).abs() < 1e-12, "{phi}");
        assert_eq!(wpcoh_controllable_phase(f64::NAN, 0.25, 2.0, &mut phi), WpcohStatus::InvalidArgument);
    }
}

#[test]
fn phase_fits() {
    let phases: Vec<f64> = (0..16).map(|k| 2.0 * PI * k as f64 / 16.0).collect();
    let shifts = [0.4, -1.2, 2.5];
    let y: Vec<f64> = shifts.iter().flat_map(|d| phases.iter().map(move |p| 2.0 + 0.7 * (p - d).cos())).collect();
    let mut fits = [WpcohPhaseFit::default(); 3];
    unsafe {
        assert_eq!(wpcoh_fit_phase_scan(phases.as_ptr(), 16, y.as_ptr(), 3, 3.0, 0.01, fits.as_mut_ptr()), WpcohStatus::Ok);
    }
    for (f, d) in fits.iter().zip(shifts) {
        assert!((f.phase - d).abs() < 1e-10 && (f.c1 - 0.7).abs() < 1e-10 && f.significant, "{f:?}");
    }
    let mut one = WpcohPhaseFit::default();
    unsafe {
        assert_eq!(wpcoh_fit_cosine(phases.as_ptr(), y.as_ptr(), ptr::null(), 16, 1.0, &mut one), WpcohStatus::Ok);
        assert!((one.phase - 0.4).abs() < 1e-10);
        assert_eq!(wpcoh_fit_cosine(phases.as_ptr(), y.as_ptr(), ptr::null(), 2, 1.0, &mut one), WpcohStatus::Numerical);
        assert_eq!(wpcoh_fit_cosine(ptr::null(), y.as_ptr(), ptr::null(), 16, 1.0, &mut one), WpcohStatus::NullPointer);
    }
}

#[test]
fn trajectory_and_covariance_handles() {
    unsafe {
        let mut cfg = ptr::null_mut();
        let text = CString::new("[propagation]\ntotal_time_fs = 100.0\n[scan]\ndelay_stop_fs = 100.0\nphase_points = 8\n[events]\nshots_per_phase = 500\n").unwrap();
        assert_eq!(wpcoh_config_from_toml(text.as_ptr(), &mut cfg), WpcohStatus::Ok);
        let mut traj = ptr::null_mut();
        assert_eq!(wpcoh_simulate(cfg, &mut traj), WpcohStatus::Ok);
        let (mut snaps, mut points) = (0, 0);
        assert_eq!(wpcoh_trajectory_shape(traj, &mut snaps, &mut points), WpcohStatus::Ok);
        assert_eq!((snaps, points), (101, 2048));
        let mut times = vec![0.0; snaps];
        assert_eq!(wpcoh_trajectory_times(traj, times.as_mut_ptr(), snaps), WpcohStatus::Ok);
        assert!((times[95] - 95.0).abs() < 1e-9);

        let mut len = 0;
        let st = wpcoh_trajectory_phase_difference(traj, 95.0, 1e-4, ptr::null_mut(), ptr::null_mut(), 0, &mut len);
        assert_eq!(st, WpcohStatus::InvalidArgument);
        assert!(len > 10);
        let (mut r, mut ph) = (vec![0.0; len], vec![0.0; len]);
        assert_eq!(wpcoh_trajectory_phase_difference(traj, 95.0, 1e-4, r.as_mut_ptr(), ph.as_mut_ptr(), len, &mut len), WpcohStatus::Ok);
        assert!(r.windows(2).all(|w| w[1] > w[0]));

        let mut h = WpcohHockey::default();
        let mut found = false;
        assert_eq!(wpcoh_trajectory_hockey(traj, cfg, 95.0, &mut h, &mut found), WpcohStatus::Ok);
        assert!(found && h.passes, "{h:?}");
        assert_eq!(wpcoh_trajectory_hockey(traj, cfg, 500.0, &mut h, &mut found), WpcohStatus::Numerical);
        wpcoh_trajectory_free(traj);

        let dir = tempfile::tempdir().unwrap();
        let mut ctx = Context::new((*cfg).config().clone(), dir.path()).unwrap();
        ctx.plots = false;
        let events = pipeline::cmd_synth(&ctx, ScanAxis::Phase, None).unwrap();
        let path = CString::new(events.to_str().unwrap()).unwrap();
        let mut map = ptr::null_mut();
        assert_eq!(wpcoh_covariance_from_events(cfg, path.as_ptr(), WpcohAxis::Phase, &mut map), WpcohStatus::Ok);
        let (mut np, mut nb) = (0, 0);
        assert_eq!(wpcoh_covariance_shape(map, &mut np, &mut nb), WpcohStatus::Ok);
        assert_eq!(np, 8);
        let mut cov = vec![0.0; np * nb];
        let mut edges = vec![0.0; nb + 1];
        assert_eq!(wpcoh_covariance_copy(map, ptr::null_mut(), edges.as_mut_ptr(), cov.as_mut_ptr(), ptr::null_mut()), WpcohStatus::Ok);
        assert!(cov.iter().sum::<f64>() > 0.0);
        assert!(edges.windows(2).all(|w| w[1] > w[0]));
        wpcoh_covariance_free(map);

        let missing = CString::new(dir.path().join("none.csv").to_str().unwrap()).unwrap();
        assert_eq!(wpcoh_covariance_from_events(cfg, missing.as_ptr(), WpcohAxis::Phase, &mut map), WpcohStatus::Io);
        wpcoh_config_free(cfg);
    }
}

#[test]
fn header_declares_the_api() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/wpcoh.h")).unwrap();
    for name in [
        "wpcoh_last_error_message",
        "wpcoh_simulate",
        "wpcoh_shaper_mask",
        "wpcoh_fit_phase_scan",
        "wpcoh_covariance_copy",
        "typedef struct WpcohTrajectory WpcohTrajectory",
        "WPCOH_STATUS_PANIC = 5",
    ] {
        assert!(header.contains(name), "{name}");
    }
}

#[test]
fn header_compiles_as_c() {
    let header = concat!(env!("CARGO_MANIFEST_DIR"), "/include/wpcoh.h");
    let Ok(o) = std::process::Command::new("cc").args(["-fsyntax-only", "-Wall", "-Werror", "-x", "c", header]).output() else {
        return;
    };
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
}
