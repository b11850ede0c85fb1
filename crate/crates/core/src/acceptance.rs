//! Self-checks run by `wpcoh reproduce` and by the acceptance test target.
//! Each check returns an [`Outcome`]; errors inside a check count as
//! failures rather than aborting the run.

use std::f64::consts::PI;
use std::fmt;
use std::fs;
use std::path::Path;
use std::time::Instant;

use crate::analysis::{dominant_harmonic, fit_cosine, modulation_spectrum};
use crate::covariance::{coincidence_oracle, correlation, covariance_map, ScanAxis};
use crate::config::RunConfig;
use crate::events::{sample_pair_events, EventGenerator, EventWriter, ScanPointYield, YieldMap};
use crate::grid::SpatialGrid;
use crate::pipeline::{self, Context};
use crate::potential::PotentialPair;
use crate::propagator::{propagate_pair, PropagationParams, SplitOperator, Trajectory};
use crate::shaper::{envelope_peaks, nphoton_effective_field, shaped_field, shaper_mask, ShaperMask};
use crate::units::{ev_to_hartree, fs_to_au};
use crate::wavefunction::{overlap, phase_difference, wrap_phase, Wavefunction};
use crate::{alloc, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub id: u32,
    pub title: &'static str,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "criterion {:>2} {} {:<34} {} ({:.1} s)",
            self.id,
            if self.passed { "PASS" } else { "FAIL" },
            self.title,
            self.detail,
            self.seconds
        )
    }
}

fn timed(id: u32, title: &'static str, f: impl FnOnce() -> Result<(bool, String)>) -> Outcome {
    let start = Instant::now();
    let (passed, detail) = f().unwrap_or_else(|e| (false, format!("error: {e}")));
    Outcome {
        id,
        title,
        passed,
        detail,
        seconds: start.elapsed().as_secs_f64(),
    }
}

/// Norm drift over 1e5 split-operator steps without absorber, with the
/// run time limited to one second.
pub fn unitarity() -> Outcome {
    timed(1, "unitarity", || {
        let g = SpatialGrid::new(-10.0, 10.0, 512)?;
        let mass = 1000.0;
        let v: Vec<f64> = g.points().iter().map(|r| 0.5 * r * r + 0.01 * r.powi(4)).collect();
        let chi = Wavefunction::gaussian(g, 1.5, 0.3, 0.0, mass)?;
        let mut op = SplitOperator::new(&g, mass, &v, 0.5, None)?;
        let mut psi = chi.clone();
        let steps = 100_000;
        let start = Instant::now();
        op.run(psi.values_mut(), steps);
        let secs = start.elapsed().as_secs_f64();
        let drift = (psi.norm_squared() - 1.0).abs();
        Ok((drift < 1e-10 && secs < 1.0, format!("norm drift {drift:.2e} over {steps} steps on {} points in {secs:.3} s", g.len())))
    })
}

/// Free spreading, harmonic return and Gaussian overlap oracles.
pub fn analytic_oracles() -> Outcome {
    timed(2, "analytic oracles", || {
        let g = SpatialGrid::new(-40.0, 40.0, 1024)?;
        let (mass, sigma0, dt) = (1.0, 1.0, 0.005);
        let mut psi = Wavefunction::gaussian(g, 0.0, sigma0, 0.0, mass)?;
        SplitOperator::new(&g, mass, &vec![0.0; g.len()], dt, None)?.run(psi.values_mut(), 1000);
        let t = 1000.0 * dt;
        let expect = sigma0 * sigma0 + (t / (2.0 * mass * sigma0)).powi(2);
        let spread = (psi.position_variance() / expect - 1.0).abs();

        let g = SpatialGrid::new(-10.0, 10.0, 512)?;
        let (mass, k) = (1000.0f64, 1.0f64);
        let omega = (k / mass).sqrt();
        let sigma = (1.0 / (2.0 * mass * omega)).sqrt();
        let v: Vec<f64> = g.points().iter().map(|r| 0.5 * k * r * r).collect();
        let mut psi = Wavefunction::gaussian(g, 1.0, sigma, 0.0, mass)?;
        let steps = 2000;
        SplitOperator::new(&g, mass, &v, 2.0 * PI / omega / steps as f64, None)?.run(psi.values_mut(), steps);
        let ret = (psi.mean_position() - 1.0).abs();

        let g = SpatialGrid::new(-20.0, 20.0, 2048)?;
        let (s, d) = (0.7, 1.3);
        let a = Wavefunction::gaussian(g, -0.5 * d, s, 0.0, 1.0)?;
        let b = Wavefunction::gaussian(g, 0.5 * d, s, 0.0, 1.0)?;
        let ov = (overlap(&a, &b)?.norm() - (-d * d / (8.0 * s * s)).exp()).abs();
        Ok((
            spread < 1e-6 && ret < 1e-4 && ov < 1e-6,
            format!("spreading rel. error {spread:.1e}, period return {ret:.1e} bohr, overlap error {ov:.1e}"),
        ))
    })
}

/// `Δφ(R,t) = -ΔV t` for surfaces differing by a constant.
pub fn constant_offset(cfg: &RunConfig) -> Outcome {
    timed(3, "constant-offset dephasing", || {
        let lower = cfg.lower_curve()?;
        let dv = ev_to_hartree(cfg.photon_energy_ev());
        let wp = cfg.wavepacket_on(PotentialPair::new(lower.clone(), lower, dv)?)?;
        let g = *wp.grid();
        let p = &cfg.propagation;
        let start = g.r_max() - p.absorber_fraction * (g.r_max() - g.r_min());
        let params = PropagationParams::new(&g, p.dt_au, fs_to_au(100.0), fs_to_au(10.0), p.absorber_strength, start)?;
        let tr = propagate_pair(&wp, &params)?;
        let mut worst = 0.0f64;
        for i in 0..tr.len() {
            let (c1, c2) = tr.snapshot(i);
            let pd = phase_difference(&c1, &c2, p.density_floor)?;
            let expect = -dv * tr.times[i];
            for ph in &pd.phase {
                worst = worst.max(wrap_phase(ph - expect).abs());
            }
        }
        Ok((worst < 1e-8, format!("max |dphi + dV t| = {worst:.1e} rad over {} snapshots to 100 fs", tr.len())))
    })
}

/// Hockey-stick shape of the model and its persistence over the
/// perturbed-potential ensemble.
pub fn hockey_stick(cfg: &RunConfig, traj: &Trajectory) -> (Outcome, Vec<pipeline::EnsembleMember>) {
    let mut members = Vec::new();
    let outcome = timed(4, "hockey stick and persistence", || {
        let i = traj.index_at(cfg.ensemble.probe_time_fs)?;
        let (_, m) = pipeline::hockey_at_index(traj, i, cfg.propagation.density_floor, &cfg.hockey_settings())?;
        let Some(m) = m else {
            return Ok((false, "phase difference too short to fit".into()));
        };
        let phase = pipeline::phase_scan(cfg, traj)?;
        let a = pipeline::analyze_phase_map(cfg, &phase.phases, &phase.centers(), &phase.by_bin(), None)?;
        let from_yield = a.hockey.is_some_and(|h| h.passes);
        let start = Instant::now();
        members = pipeline::run_ensemble(cfg)?;
        let secs = start.elapsed().as_secs_f64();
        let frac = pipeline::persistence(&members);
        Ok((
            m.passes && from_yield && frac >= cfg.ensemble.min_persistence && secs < 300.0,
            format!(
                "R^2 {:.4}, departure {:.2} rad; from yield fit R^2 {:.4}, departure {:.2} rad; persists in {:.0}% of {} members ({secs:.0} s)",
                m.line.r_squared,
                m.departure,
                a.hockey.map_or(f64::NAN, |h| h.line.r_squared),
                a.hockey.map_or(f64::NAN, |h| h.departure),
                100.0 * frac,
                members.len()
            ),
        ))
    });
    (outcome, members)
}

/// One modulation per 2π for one-photon separation, K for K photons, and
/// an exact single-harmonic fit of noiseless model output.
pub fn harmonic_count(cfg: &RunConfig, traj: &Trajectory) -> Outcome {
    timed(5, "phase-scan harmonic count", || {
        let mut ok = true;
        let mut found = Vec::new();
        let mut worst = 0.0f64;
        for k in 1..=3u32 {
            let mut c = cfg.clone();
            c.system.photon_separation = k;
            let scan = pipeline::phase_scan_with(&c, &c.system()?, traj)?;
            let h = dominant_harmonic(&scan.phases, &scan.totals, cfg.analysis.max_harmonic)?;
            found.push(h);
            ok &= h == k;
            let by_bin = scan.by_bin();
            let fits: Vec<_> = by_bin.iter().map(|y| fit_cosine(&scan.phases, y, None, k as f64)).collect::<Result<_>>()?;
            let max_c1 = fits.iter().fold(0.0f64, |m, f| m.max(f.c1));
            for f in fits.iter().filter(|f| f.c1 > 1e-3 * max_c1) {
                worst = worst.max(f.residual_rms / f.c1);
            }
        }
        ok &= worst < 1e-10;
        Ok((ok, format!("K = 1, 2, 3 give {found:?} modulations per 2pi; worst residual / amplitude {worst:.1e}")))
    })
}

/// Spectral width of `E(t)^n` against `√n`.
pub fn bandwidth_scaling(cfg: &RunConfig) -> Outcome {
    timed(6, "sqrt(n) bandwidth", || {
        let pulse = cfg.pulse()?;
        let base = nphoton_effective_field(&pulse, 1)?.fwhm().unwrap_or(f64::NAN);
        let mut worst = 0.0f64;
        let mut ratios = Vec::new();
        for n in [2u32, 4, 5] {
            let w = nphoton_effective_field(&pulse, n)?.fwhm().unwrap_or(f64::NAN);
            let r = w / base;
            ratios.push(format!("{n}: {r:.4}"));
            worst = worst.max((r / (n as f64).sqrt() - 1.0).abs());
        }
        Ok((worst < 0.01, format!("FWHM ratios {}; worst deviation from sqrt(n) {:.2}%", ratios.join(", "), 100.0 * worst)))
    })
}

/// Mask value at the locking frequency and the cleanliness of a 95 fs pair.
pub fn mask_properties(cfg: &RunConfig) -> Outcome {
    timed(7, "mask properties", || {
        let pulse = cfg.pulse()?;
        let m = cfg.mask()?;
        let expect = m.a_tot * (1.0 + m.a_r);
        let mut worst = 0.0f64;
        for tau in [0.0, 7.3, 95.0, 250.0, 1000.0, -40.0] {
            let mk = ShaperMask::new(m.a_tot, m.a_r, tau, 0.0, m.nu_l_phz)?;
            let v = shaper_mask(m.nu_l_phz, &mk);
            worst = worst.max((v.norm() - expect).abs() / expect).max(v.im.abs());
        }
        let mk = ShaperMask::new(m.a_tot, m.a_r, 95.0, m.phi_l, m.nu_l_phz)?;
        let field = shaped_field(&pulse, &mk)?;
        let y = field.intensity();
        let peak = y.iter().cloned().fold(0.0, f64::max);
        let guard = 3.0 * pulse.fwhm_fs;
        let between = field
            .times
            .iter()
            .zip(&y)
            .filter(|(t, _)| **t > guard && **t < 95.0 - guard)
            .map(|(_, v)| *v)
            .fold(0.0, f64::max)
            / peak;
        let peaks = envelope_peaks(&field, 1e-3);
        let sep = if peaks.len() == 2 { peaks[1].time_fs - peaks[0].time_fs } else { f64::NAN };
        Ok((
            worst < 1e-12 && between < 1e-4 && (sep - 95.0).abs() < 0.5,
            format!("|M(nu_L)| error {worst:.1e}; inter-pulse intensity {between:.1e} of peak; pulse separation {sep:.3} fs"),
        ))
    })
}

/// Model KER distribution at the phase-scan delay, rebinned to 0.5 eV.
fn coarse_yield_map(cfg: &RunConfig, traj: &Trajectory) -> Result<(RunConfig, YieldMap)> {
    let mut c = cfg.clone();
    c.scan.ker_bins = ((c.scan.ker_max_ev - c.scan.ker_min_ev) / 0.5).round().max(1.0) as usize;
    c.scan.phase_points = 5;
    let scan = pipeline::phase_scan(&c, traj)?;
    let mut map = scan.yield_map();
    map.points.truncate(1);
    Ok((c, map))
}

/// Covariance against the coincidence oracle, background robustness and
/// the Bernoulli pair.
pub fn covariance_checks(cfg: &RunConfig, traj: &Trajectory) -> Outcome {
    timed(8, "covariance = coincidence", || {
        let (c, map) = coarse_yield_map(cfg, traj)?;
        let species = c.species_table()?;
        let settings = c.covariance_settings(&species, ScanAxis::Phase)?;
        let mut model = c.event_model()?;
        let shots = 100_000;

        model.pair_probability = 0.1;
        model.background_rates.clear();
        let clean = sample_pair_events(&model, &map, shots, c.seed)?;
        let cov = covariance_map(&clean, &settings)?;
        let oracle = coincidence_oracle(&clean, &settings)?;
        let r = correlation(&cov.cov[0], &oracle.counts[0]);
        let argmax = |v: &[f64]| v.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).map_or(0, |x| x.0);
        let oracle_peak = argmax(&oracle.counts[0]);

        model.background_rates = model.species.iter().filter(|s| s.id == c.events.fragment_a || s.id == c.events.fragment_b).map(|s| (s.id, 4.0)).collect();
        let noisy = sample_pair_events(&model, &map, shots, c.seed.wrapping_add(1))?;
        let cov_bg = covariance_map(&noisy, &settings)?;
        let bg_peak = argmax(&cov_bg.cov[0]);
        let mut ungated = settings.clone();
        ungated.epsilon = None;
        let raw = coincidence_oracle(&noisy, &ungated)?;

        let start = Instant::now();
        let one_bin = YieldMap {
            ker_edges_ev: vec![2.0, 3.0],
            points: vec![ScanPointYield {
                delay_fs: 0.0,
                phase_rad: 0.0,
                weights: vec![1.0],
            }],
        };
        model.pair_probability = 0.5;
        model.background_rates.clear();
        let bern = sample_pair_events(&model, &one_bin, shots, c.seed.wrapping_add(2))?;
        let mut bs = settings.clone();
        bs.ker_edges_ev = vec![2.0, 3.0];
        let bmap = covariance_map(&bern, &bs)?;
        let bsecs = start.elapsed().as_secs_f64();
        let (bc, bsig) = (bmap.cov[0][0], bmap.sigma[0][0]);
        let pass = r > 0.99 && bg_peak == oracle_peak && (bc - 0.25).abs() < 3.0 * bsig && bsecs < 60.0;
        Ok((
            pass,
            format!(
                "corr {r:.5}; peak bin {bg_peak} with background vs oracle {oracle_peak} ({:.1} candidate pairs per shot before gating); Bernoulli cov {bc:.5} +/- {bsig:.1e} in {bsecs:.2} s",
                raw.pairs_per_shot
            ),
        ))
    })
}

/// Period recovery from a synthetic series, from the model's phase-averaged
/// delay scan and from the covariance of synthetic events.
pub fn fourier_recovery(cfg: &RunConfig, traj: &Trajectory, scratch: &Path) -> Outcome {
    timed(9, "Fourier recovery", || {
        let delays = crate::config::inclusive_range("delay", 0.0, 400.0, 2.0)?;
        let y: Vec<f64> = delays.iter().map(|t| 1.0 + 0.3 * (2.0 * PI * t / 28.0).cos()).collect();
        let p_syn = modulation_spectrum(&delays, &y, cfg.analysis.min_periods)?.dominant_period.unwrap_or(f64::NAN);

        let injected = cfg.vibration_period_fs().unwrap_or(f64::NAN);
        let scan = pipeline::delay_scan(cfg, traj)?;
        let p_model = pipeline::analyze_delay_series(cfg, &scan.delays, &scan.totals)?.dominant_period.unwrap_or(f64::NAN);

        fs::create_dir_all(scratch)?;
        let model = cfg.event_model()?;
        let ymap = scan.yield_map();
        let gen = EventGenerator::new(&model, &ymap, cfg.events.shots_per_delay, cfg.seed)?;
        let path = scratch.join("fourier_events.csv");
        let mut w = EventWriter::create(&path, &cfg.hash(), &model.species, &model.calibration)?;
        gen.for_each_chunk(2 * rayon::current_num_threads(), |ch| ch.iter().try_for_each(|s| w.write_shot(s)))?;
        w.finish()?;
        let cov = pipeline::stream_covariance(&path, cfg, ScanAxis::Delay)?;
        fs::remove_file(&path)?;
        let totals: Vec<f64> = cov.cov.iter().map(|r| r.iter().sum()).collect();
        let p_cov = pipeline::analyze_delay_series(cfg, &cov.scan_values, &totals)?.dominant_period.unwrap_or(f64::NAN);

        let (centre, half) = crate::units::OBSERVED_MODULATION_PERIOD_FS;
        let in_band = |p: f64| (p - centre).abs() <= half;
        let pass = (p_syn - 28.0).abs() < 1.0
            && (p_model - injected).abs() < 1.0
            && (p_cov - injected).abs() < 1.0
            && (!in_band(injected) || (in_band(p_model) && in_band(p_cov)));
        Ok((
            pass,
            format!("synthetic 28 fs -> {p_syn:.3} fs; injected {injected:.2} fs -> model {p_model:.3} fs, covariance {p_cov:.3} fs (band {centre} +/- {half} fs)"),
        ))
    })
}

/// Phase fitted from the simulated phase scan against the propagated
/// phase difference at `R = 1/E`.
pub fn end_to_end_phase(cfg: &RunConfig, traj: &Trajectory) -> Outcome {
    timed(10, "end-to-end phase agreement", || {
        let scan = pipeline::phase_scan(cfg, traj)?;
        let c = pipeline::phase_consistency(cfg, traj, &scan)?;
        let e_lo = c.energy_ev.first().copied().unwrap_or(f64::NAN);
        let e_hi = c.energy_ev.last().copied().unwrap_or(f64::NAN);
        Ok((
            c.max_abs_difference < cfg.analysis.phase_agreement_rad,
            format!("max |dPhi(E) - dphi(1/E)| = {:.4} rad over {} bins ({e_lo:.2}-{e_hi:.2} eV)", c.max_abs_difference, c.energy_ev.len()),
        ))
    })
}

fn data_files(dir: &Path) -> Result<Vec<String>> {
    let mut names: Vec<String> = fs::read_dir(dir)?
        .filter_map(|e| e.ok())
        .filter(|e| e.path().extension().is_some_and(|x| x == "csv"))
        .filter_map(|e| e.file_name().into_string().ok())
        .collect();
    names.sort();
    Ok(names)
}

/// Event file of a default phase scan holding roughly `events` ions.
fn write_sized_events(cfg: &RunConfig, traj: &Trajectory, events: u64, path: &Path) -> Result<u64> {
    let scan = pipeline::phase_scan(cfg, traj)?;
    let map = scan.yield_map();
    let model = cfg.event_model()?;
    let per_shot = 2.0 * model.pair_probability + model.background_rates.iter().map(|r| r.1).sum::<f64>();
    let shots = ((events as f64 / per_shot) / map.points.len() as f64).ceil().max(2.0) as u64;
    let gen = EventGenerator::new(&model, &map, shots, cfg.seed)?;
    let mut w = EventWriter::create(path, &cfg.hash(), &model.species, &model.calibration)?;
    let mut n = 0u64;
    gen.for_each_chunk(2 * rayon::current_num_threads(), |ch| {
        ch.iter().try_for_each(|s| {
            n += s.ions.len() as u64;
            w.write_shot(s)
        })
    })?;
    w.finish()?;
    Ok(n)
}

/// Rerun the data chain and compare every table byte for byte; check that
/// streaming covariance memory does not grow with the event count; and
/// check the total run time.
pub fn determinism_and_scale(ctx: &Context, traj: &Trajectory, started: Instant) -> Outcome {
    timed(11, "determinism and scale", || {
        let rerun_dir = ctx.out.join("rerun");
        let mut rerun = Context::new(ctx.config.clone(), &rerun_dir)?;
        rerun.plots = false;
        pipeline::data_chain(&rerun)?;
        let mut differing = Vec::new();
        let names = data_files(&rerun_dir)?;
        for name in &names {
            let a = fs::read(ctx.out.join(name));
            let b = fs::read(rerun_dir.join(name))?;
            if a.map_or(true, |a| a != b) {
                differing.push(name.clone());
            }
        }
        fs::remove_dir_all(&rerun_dir)?;

        let (mem_ok, mem) = if alloc::is_active() {
            let small = ctx.out.join("memory_small.csv");
            let large = ctx.out.join("memory_large.csv");
            let n_small = write_sized_events(&ctx.config, traj, 100_000, &small)?;
            let n_large = write_sized_events(&ctx.config, traj, 1_000_000, &large)?;
            let (r1, m1) = alloc::measure(|| pipeline::stream_covariance(&small, &ctx.config, ScanAxis::Phase));
            let (r2, m2) = alloc::measure(|| pipeline::stream_covariance(&large, &ctx.config, ScanAxis::Phase));
            r1?;
            r2?;
            fs::remove_file(&small)?;
            fs::remove_file(&large)?;
            (
                (m2 as f64) <= 1.1 * m1 as f64 + (1 << 20) as f64,
                format!("peak heap {:.1} MiB for {n_small} events vs {:.1} MiB for {n_large}", m1 as f64 / 1048576.0, m2 as f64 / 1048576.0),
            )
        } else {
            (false, "heap not instrumented (counting allocator not installed)".to_string())
        };
        let secs = started.elapsed().as_secs_f64();
        let pass = differing.is_empty() && !names.is_empty() && mem_ok && secs < 900.0;
        Ok((
            pass,
            format!(
                "{} tables rerun, {} differ{}; {mem}; run time {secs:.0} s on {} threads",
                names.len(),
                differing.len(),
                if differing.is_empty() { String::new() } else { format!(" ({})", differing.join(", ")) },
                rayon::current_num_threads()
            ),
        ))
    })
}

/// Every criterion in order. `started` marks the beginning of the run whose
/// duration criterion 11 bounds.
pub fn run_all(ctx: &Context, traj: &Trajectory, started: Instant) -> (Vec<Outcome>, Vec<pipeline::EnsembleMember>) {
    let cfg = &ctx.config;
    let mut out = vec![unitarity(), analytic_oracles(), constant_offset(cfg)];
    let (hockey, members) = hockey_stick(cfg, traj);
    out.push(hockey);
    out.push(harmonic_count(cfg, traj));
    out.push(bandwidth_scaling(cfg));
    out.push(mask_properties(cfg));
    out.push(covariance_checks(cfg, traj));
    out.push(fourier_recovery(cfg, traj, &ctx.out.join("scratch")));
    out.push(end_to_end_phase(cfg, traj));
    out.push(determinism_and_scale(ctx, traj, started));
    let _ = fs::remove_dir_all(ctx.out.join("scratch"));
    (out, members)
}

pub fn write_summary(path: &Path, hash: &str, outcomes: &[Outcome]) -> Result<()> {
    let mut text = format!("# wpcoh acceptance summary\n# config_hash: {hash}\n");
    for o in outcomes {
        text.push_str(&o.to_string());
        text.push('\n');
    }
    let passed = outcomes.iter().filter(|o| o.passed).count();
    text.push_str(&format!("{passed}/{} criteria passed\n", outcomes.len()));
    fs::write(path, text)?;
    Ok(())
}
