//! C ABI for the wpcoh simulator.
//!
//! Every fallible function returns a [`WpcohStatus`] and writes results
//! through out-pointers. Objects are opaque handles created by constructor
//! functions such as `wpcoh_simulate` and released with the matching
//! `*_free`. After a non-OK status, [`wpcoh_last_error_message`] describes
//! the failure on the calling thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;
use std::slice;

use wpcoh::analysis::{fit_cosine, fit_phase_scan, FitSettings, PhaseFitResult};
use wpcoh::config::RunConfig;
use wpcoh::covariance::{CovarianceMap, ScanAxis};
use wpcoh::pipeline;
use wpcoh::potential::PotentialCurve;
use wpcoh::propagator::Trajectory;
use wpcoh::shaper::{self, ShaperMask};
use wpcoh::wavefunction::phase_difference;
use wpcoh::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WpcohStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Numerical = 4,
    Panic = 5,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WpcohAxis {
    Delay = 0,
    Phase = 1,
}

impl From<WpcohAxis> for ScanAxis {
    fn from(a: WpcohAxis) -> Self {
        match a {
            WpcohAxis::Delay => ScanAxis::Delay,
            WpcohAxis::Phase => ScanAxis::Phase,
        }
    }
}

/// Cosine fit `y = c0 + c1 cos(k φ - phase)` of one KER bin.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct WpcohPhaseFit {
    pub c0: f64,
    pub c1: f64,
    pub phase: f64,
    pub residual_rms: f64,
    pub sigma_c0: f64,
    pub sigma_c1: f64,
    pub sigma_phase: f64,
    pub significant: bool,
}

impl From<PhaseFitResult> for WpcohPhaseFit {
    fn from(f: PhaseFitResult) -> Self {
        WpcohPhaseFit {
            c0: f.c0,
            c1: f.c1,
            phase: f.phase,
            residual_rms: f.residual_rms,
            sigma_c0: f.sigma_c0,
            sigma_c1: f.sigma_c1,
            sigma_phase: f.sigma_phase,
            significant: f.significant,
        }
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct WpcohHockey {
    pub r_squared: f64,
    pub departure: f64,
    pub slope: f64,
    pub intercept: f64,
    pub passes: bool,
}

/// Run configuration.
pub struct WpcohConfig(RunConfig);

impl WpcohConfig {
    /// The wrapped configuration, for Rust callers sharing a handle.
    pub fn config(&self) -> &RunConfig {
        &self.0
    }
}

/// Spline potential curve (bohr, eV).
pub struct WpcohPotential(PotentialCurve);

/// Two-surface propagation result.
pub struct WpcohTrajectory(Trajectory);

/// Covariance map `cov[point][bin]` with jackknife errors.
pub struct WpcohCovarianceMap(CovarianceMap);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> WpcohStatus {
    match e {
        Error::InvalidParameter { .. } | Error::Config(_) | Error::Malformed { .. } | Error::UnknownSpecies(_) => WpcohStatus::InvalidArgument,
        Error::Io(_) | Error::Csv(_) => WpcohStatus::Io,
        _ => WpcohStatus::Numerical,
    }
}

struct Fail(WpcohStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(WpcohStatus::NullPointer, format!("{what} is null"))
}

fn invalid(msg: impl Into<String>) -> Fail {
    Fail(WpcohStatus::InvalidArgument, msg.into())
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> WpcohStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            WpcohStatus::Ok
        }
        Ok(Err(Fail(s, msg))) => {
            set_error(msg);
            s
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            WpcohStatus::Panic
        }
    }
}

unsafe fn obj<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    unsafe { p.as_ref() }.ok_or_else(|| null(what))
}

unsafe fn out<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Fail> {
    unsafe { p.as_mut() }.ok_or_else(|| null(what))
}

unsafe fn input<'a>(p: *const f64, n: usize, what: &str) -> Result<&'a [f64], Fail> {
    if n == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(unsafe { slice::from_raw_parts(p, n) })
}

unsafe fn output<'a>(p: *mut f64, n: usize, what: &str) -> Result<&'a mut [f64], Fail> {
    if n == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(unsafe { slice::from_raw_parts_mut(p, n) })
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    unsafe { CStr::from_ptr(p) }.to_str().map_err(|_| invalid(format!("{what} is not UTF-8")))
}

fn boxed<T>(v: T) -> *mut T {
    Box::into_raw(Box::new(v))
}

/// Message for the last failed call on this thread, or null. Valid until
/// the next call into the library on the same thread.
#[no_mangle]
pub extern "C" fn wpcoh_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn wpcoh_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

// ---- configuration ----

/// # Safety
/// `out` must be a valid pointer to write a handle to.
#[no_mangle]
pub unsafe extern "C" fn wpcoh_config_default(out_config: *mut *mut WpcohConfig) -> WpcohStatus {
    guard(|| {
        *unsafe { out(out_config, "out_config") }? = boxed(WpcohConfig(RunConfig::default()));
        Ok(())
    })
}

/// Parse and validate a TOML configuration.
///
/// # Safety
/// `toml` must be a NUL-terminated string; `out_config` must be writable.
#[no_mangle]
pub unsafe extern "C" fn wpcoh_config_from_toml(toml: *const c_char, out_config: *mut *mut WpcohConfig) -> WpcohStatus {
    guard(|| {
        let o = unsafe { out(out_config, "out_config") }?;
        let cfg = RunConfig::from_toml_str(unsafe { text(toml, "toml") }?)?;
        *o = boxed(WpcohConfig(cfg));
        Ok(())
    })
}

/// # Safety
/// `config` must be a handle from this library.
#[no_mangle]
pub unsafe extern "C" fn wpcoh_config_set_seed(config: *mut WpcohConfig, seed: u64) -> WpcohStatus {
    guard(|| {
        unsafe { out(config, "config") }?.0.seed = seed;
        Ok(())
    })
}

/// # Safety
/// `config` must be null or a handle from this library, freed once.
#[no_mangle]
pub unsafe extern "C" fn wpcoh_config_free(config: *mut WpcohConfig) {
    if !config.is_null() {
        drop(unsafe { Box::from_raw(config) });
    }
}

// ---- potential ----

/// Natural cubic spline through `n` control points (bohr, eV).
///
/// # Safety
/// `r_bohr` and `v_ev` must hold `n` values each.
#[no_mangle]
pub unsafe extern "C" fn wpcoh_potential_new(r_bohr: *const f64, v_ev: *const f64, n: usize, out_potential: *mut *mut WpcohPotential) -> WpcohStatus {
    guard(|| {
        let o = unsafe { out(out_potential, "out_potential") }?;
        let r = unsafe { input(r_bohr, n, "r_bohr") }?;
        let v = unsafe { input(v_ev, n, "v_ev") }?;
        let pts: Vec<(f64, f64)> = r.iter().zip(v).map(|(a, b)| (*a, *b)).collect();
        *o = boxed(WpcohPotential(PotentialCurve::from_control_points(&pts)?));
        Ok(())
    })
}

/// Evaluate the curve at `n` radii; values in eV.
///
/// # Safety
/// `r_bohr` and `out_v_ev` must hold `n` values each.
#[no_mangle]
pub unsafe extern "C" fn wpcoh_potential_eval(potential: *const WpcohPotential, r_bohr: *const f64, n: usize, out_v_ev: *mut f64) -> WpcohStatus {
    guard(|| {
        let p = unsafe { obj(potential, "potential") }?;
        let r = unsafe { input(r_bohr, n, "r_bohr") }?;
        let o = unsafe { output(out_v_ev, n, "out_v_ev") }?;
        for (y, x) in o.iter_mut().zip(r) {
            *y = p.0.eval(*x);
        }
        Ok(())
    })
}

/// # Safety
/// `potential` must be null or a handle from this library, freed once.
#[no_mangle]
pub unsafe extern "C" fn wpcoh_potential_free(potential: *mut WpcohPotential) {
    if !potential.is_null() {
        drop(unsafe { Box::from_raw(potential) });
    }
}

// ---- propagation ----

/// Propagate the two-state packet described by `config`.
///
/// # Safety
/// `config` must be a handle; `out_trajectory` must be writable.
#[no_mangle]
pub unsafe extern "C" fn wpcoh_simulate(config: *const WpcohConfig, out_trajectory: *mut *mut WpcohTrajectory) -> WpcohStatus {
    guard(|| {
        let o = unsafe { out(out_trajectory, "out_trajectory") }?;
        let c = unsafe { obj(config, "config") }?;
        *o = boxed(WpcohTrajectory(pipeline::simulate(&c.0)?));
        Ok(())
    })
}

/// Number of snapshots and grid points.
///
/// # Safety
/// `trajectory` must be a handle; the out-pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn wpcoh_trajectory_shape(trajectory: *const WpcohTrajectory, out_snapshots: *mut usize, out_points: *mut usize) -> WpcohStatus {
    guard(|| {
        let t = unsafe { obj(trajectory, "trajectory") }?;
        *unsafe { out(out_snapshots, "out_snapshots") }? = t.0.len();
        *unsafe { out(out_points, "out_points") }? = t.0.grid.len();
        Ok(())
    })
}

/// Snapshot times (fs); `out_times_fs` must hold one value per snapshot.
///
/// # Safety
/// `out_times_fs` must hold `capacity` values.
#[no_mangle]
pub unsafe extern "C" fn wpcoh_trajectory_times(trajectory: *const WpcohTrajectory, out_times_fs: *mut f64, capacity: usize) -> WpcohStatus {
    guard(|| {
        let t = unsafe { obj(trajectory, "trajectory") }?;
        let times = t.0.times_fs();
        if capacity < times.len() {
            return Err(invalid(format!("capacity {capacity} < {} snapshots", times.len())));
        }
        unsafe { output(out_times_fs, times.len(), "out_times_fs") }?.copy_from_slice(&times);
        Ok(())
    })
}

/// R-resolved phase difference at snapshot time `t_fs`, restricted to
/// points where both densities exceed `density_floor` times their maxima.
/// Writes up to `capacity` points and the actual count to `out_len`; if
/// `capacity` is too small nothing is copied, `out_len` holds the required
/// size and the status is `InvalidArgument`.
///
/// # Safety
/// `out_r_bohr` and `out_phase` must hold `capacity` values.
#[no_mangle]
pub unsafe extern "C" fn wpcoh_trajectory_phase_difference(
    trajectory: *const WpcohTrajectory,
    t_fs: f64,
    density_floor: f64,
    out_r_bohr: *mut f64,
    out_phase: *mut f64,
    capacity: usize,
    out_len: *mut usize,
) -> WpcohStatus {
    guard(|| {
        let t = unsafe { obj(trajectory, "trajectory") }?;
        let len = unsafe { out(out_len, "out_len") }?;
        let (c1, c2) = t.0.snapshot_at(t_fs)?;
        let pd = phase_difference(&c1, &c2, density_floor)?;
        *len = pd.len();
        if capacity < pd.len() {
            return Err(invalid(format!("capacity {capacity} < {} points", pd.len())));
        }
        unsafe { output(out_r_bohr, pd.len(), "out_r_bohr") }?.copy_from_slice(&pd.r);
        unsafe { output(out_phase, pd.len(), "out_phase") }?.copy_from_slice(&pd.phase);
        Ok(())
    })
}

/// Hockey-stick metrics of the phase difference at `t_fs`, using the
/// density floor and thresholds of `config`. `out_found` is false when the
/// phase difference is too short to fit.
///
/// # Safety
/// All pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn wpcoh_trajectory_hockey(
    trajectory: *const WpcohTrajectory,
    config: *const WpcohConfig,
    t_fs: f64,
    out_metrics: *mut WpcohHockey,
    out_found: *mut bool,
) -> WpcohStatus {
    guard(|| {
        let t = unsafe { obj(trajectory, "trajectory") }?;
        let c = unsafe { obj(config, "config") }?;
        let m = unsafe { out(out_metrics, "out_metrics") }?;
        let found = unsafe { out(out_found, "out_found") }?;
        let i = t.0.index_at(t_fs)?;
        let (_, h) = pipeline::hockey_at_index(&t.0, i, c.0.propagation.density_floor, &c.0.hockey_settings())?;
        *found = h.is_some();
        *m = h.map_or_else(WpcohHockey::default, |h| WpcohHockey {
            r_squared: h.line.r_squared,
            departure: h.departure,
            slope: h.line.slope,
            intercept: h.line.intercept,
            passes: h.passes,
        });
        Ok(())
    })
}

/// # Safety
/// `trajectory` must be null or a handle from this library, freed once.
#[no_mangle]
pub unsafe extern "C" fn wpcoh_trajectory_free(trajectory: *mut WpcohTrajectory) {
    if !trajectory.is_null() {
        drop(unsafe { Box::from_raw(trajectory) });
    }
}

// ---- shaper ----

/// Complex shaper mask `M(ν)` for frequencies in PHz and `τ` in fs.
///
/// # Safety
/// `out_re` and `out_im` must be writable.
#[no_mangle]
pub unsafe extern "C" fn wpcoh_shaper_mask(
    nu_phz: f64,
    a_tot: f64,
    a_r: f64,
    tau_fs: f64,
    phi_l: f64,
    nu_l_phz: f64,
    out_re: *mut f64,
    out_im: *mut f64,
) -> WpcohStatus {
    guard(|| {
        let re = unsafe { out(out_re, "out_re") }?;
        let im = unsafe { out(out_im, "out_im") }?;
        let m = ShaperMask::new(a_tot, a_r, tau_fs, phi_l, nu_l_phz)?;
        let v = shaper::shaper_mask(nu_phz, &m);
        *re = v.re;
        *im = v.im;
        Ok(())
    })
}

/// Controllable phase `φ_L - 2π ν_L τ`, wrapped to `(-π, π]`.
///
/// # Safety
/// `out_phi` must be writable.
#[no_mangle]
pub unsafe extern "C" fn wpcoh_controllable_phase(phi_l: f64, nu_l_phz: f64, tau_fs: f64, out_phi: *mut f64) -> WpcohStatus {
    guard(|| {
        if !(phi_l.is_finite() && nu_l_phz.is_finite() && tau_fs.is_finite()) {
            return Err(invalid("arguments must be finite"));
        }
        *unsafe { out(out_phi, "out_phi") }? = shaper::controllable_phase(phi_l, nu_l_phz, tau_fs);
        Ok(())
    })
}

// ---- analysis ----

/// Least-squares fit of `y = c0 + c1 cos(k φ - ΔΦ)` over `n` samples.
/// `sigma` may be null for unweighted data.
///
/// # Safety
/// `phases`, `y` and (when non-null) `sigma` must hold `n` values.
#[no_mangle]
pub unsafe extern "C" fn wpcoh_fit_cosine(phases: *const f64, y: *const f64, sigma: *const f64, n: usize, k: f64, out_fit: *mut WpcohPhaseFit) -> WpcohStatus {
    guard(|| {
        let o = unsafe { out(out_fit, "out_fit") }?;
        let p = unsafe { input(phases, n, "phases") }?;
        let y = unsafe { input(y, n, "y") }?;
        let s = if sigma.is_null() { None } else { Some(unsafe { input(sigma, n, "sigma") }?) };
        *o = fit_cosine(p, y, s, k)?.into();
        Ok(())
    })
}

/// Per-bin single-harmonic fits of a phase scan. `y` is row-major
/// `[bins][n_phases]`; `out_fits` receives `bins` results.
///
/// # Safety
/// `phases` must hold `n_phases` values, `y` `bins * n_phases` values and
/// `out_fits` `bins` entries.
#[no_mangle]
pub unsafe extern "C" fn wpcoh_fit_phase_scan(
    phases: *const f64,
    n_phases: usize,
    y: *const f64,
    bins: usize,
    significance: f64,
    min_relative_amplitude: f64,
    out_fits: *mut WpcohPhaseFit,
) -> WpcohStatus {
    guard(|| {
        let p = unsafe { input(phases, n_phases, "phases") }?;
        let total = bins.checked_mul(n_phases).ok_or_else(|| invalid("bins * n_phases overflows"))?;
        let y = unsafe { input(y, total, "y") }?;
        if bins > 0 && out_fits.is_null() {
            return Err(null("out_fits"));
        }
        let rows: Vec<Vec<f64>> = y.chunks(n_phases.max(1)).take(bins).map(<[f64]>::to_vec).collect();
        let settings = FitSettings {
            significance,
            min_relative_amplitude,
        };
        let fits = fit_phase_scan(p, &rows, None, &settings)?;
        for (i, f) in fits.into_iter().enumerate() {
            unsafe { out_fits.add(i).write(f.into()) };
        }
        Ok(())
    })
}

// ---- covariance ----

/// Stream an event file into a covariance map using the species, bins and
/// gate of `config`.
///
/// # Safety
/// `path` must be a NUL-terminated string; other pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn wpcoh_covariance_from_events(
    config: *const WpcohConfig,
    path: *const c_char,
    axis: WpcohAxis,
    out_map: *mut *mut WpcohCovarianceMap,
) -> WpcohStatus {
    guard(|| {
        let o = unsafe { out(out_map, "out_map") }?;
        let c = unsafe { obj(config, "config") }?;
        let p = unsafe { text(path, "path") }?;
        *o = boxed(WpcohCovarianceMap(pipeline::stream_covariance(Path::new(p), &c.0, axis.into())?));
        Ok(())
    })
}

/// # Safety
/// All pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn wpcoh_covariance_shape(map: *const WpcohCovarianceMap, out_points: *mut usize, out_bins: *mut usize) -> WpcohStatus {
    guard(|| {
        let m = unsafe { obj(map, "map") }?;
        *unsafe { out(out_points, "out_points") }? = m.0.scan_values.len();
        *unsafe { out(out_bins, "out_bins") }? = m.0.ker_edges_ev.len() - 1;
        Ok(())
    })
}

/// Copy the map out. `scan_values` takes `points` values, `ker_edges_ev`
/// `bins + 1`, and `cov` / `sigma` are row-major `[points][bins]`. Any of
/// the output pointers may be null to skip it.
///
/// # Safety
/// Non-null outputs must have the sizes reported by
/// [`wpcoh_covariance_shape`].
#[no_mangle]
pub unsafe extern "C" fn wpcoh_covariance_copy(
    map: *const WpcohCovarianceMap,
    scan_values: *mut f64,
    ker_edges_ev: *mut f64,
    cov: *mut f64,
    sigma: *mut f64,
) -> WpcohStatus {
    guard(|| {
        let m = &unsafe { obj(map, "map") }?.0;
        let copy = |dst: *mut f64, src: &[f64], what: &str| -> Result<(), Fail> {
            if !dst.is_null() {
                unsafe { output(dst, src.len(), what) }?.copy_from_slice(src);
            }
            Ok(())
        };
        copy(scan_values, &m.scan_values, "scan_values")?;
        copy(ker_edges_ev, &m.ker_edges_ev, "ker_edges_ev")?;
        copy(cov, &m.cov.concat(), "cov")?;
        copy(sigma, &m.sigma.concat(), "sigma")?;
        Ok(())
    })
}

/// # Safety
/// `map` must be null or a handle from this library, freed once.
#[no_mangle]
pub unsafe extern "C" fn wpcoh_covariance_free(map: *mut WpcohCovarianceMap) {
    if !map.is_null() {
        drop(unsafe { Box::from_raw(map) });
    }
}
