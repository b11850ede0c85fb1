//! Subcommand implementations: every command reads the run configuration,
//! writes self-describing tables (and SVG figures) into an output
//! directory, and returns a short summary for the caller.

use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};

use log::{info, warn};
use rayon::prelude::*;

use crate::analysis::{
    dominant_harmonic, first_moment, fit_phase_scan, hockey_stick, modulation_spectrum, phase_vs_inverse_energy, HockeyMetrics,
    HockeySettings, ModulationSpectrum, PhaseCurve, PhaseFitResult,
};
use crate::coherence::{decoherence_decomposition, dication_yield_at_index, TwoStateSystem};
use crate::config::RunConfig;
use crate::covariance::{CovarianceAccumulator, CovarianceMap, ScanAxis, ACCUMULATION_CHUNK};
use crate::events::{EventGenerator, EventReader, EventWriter, ScanPointYield, YieldMap};
use crate::io::{read_table, Table, TableWriter};
use crate::plot::{heatmap, line_plot, Series};
use crate::potential::{coulomb_distance, PotentialPair};
use crate::propagator::{propagate_pair, PropagationParams, Trajectory};
use crate::units::{au_to_fs, ev_to_hartree, fs_to_au, hartree_to_ev};
use crate::wavefunction::{phase_difference, wrap_phase, PhaseDifference};
use crate::{Error, Result};

fn file_label(p: &Path) -> String {
    p.file_name().map_or_else(|| p.display().to_string(), |n| n.to_string_lossy().into_owned())
}

/// A configuration bound to an output directory.
pub struct Context {
    pub config: RunConfig,
    pub hash: String,
    pub out: PathBuf,
    pub plots: bool,
}

impl Context {
    pub fn new(config: RunConfig, out: &Path) -> Result<Self> {
        config.validate()?;
        fs::create_dir_all(out)?;
        Ok(Context {
            hash: config.hash(),
            config,
            out: out.to_path_buf(),
            plots: true,
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn table(&self, name: &str, meta: &[String], columns: &[&str]) -> Result<TableWriter> {
        TableWriter::create(&self.path(name), &self.hash, meta, columns)
    }
}

/// Propagate the configured two-state packet.
pub fn simulate(cfg: &RunConfig) -> Result<Trajectory> {
    propagate_pair(&cfg.wavepacket()?, &cfg.propagation_params()?)
}

/// Phase difference at snapshot `i` and its hockey-stick metrics, using
/// the state-1 density as the weight along R (equivalently 1/E).
pub fn hockey_at_index(traj: &Trajectory, i: usize, floor: f64, settings: &HockeySettings) -> Result<(PhaseDifference, Option<HockeyMetrics>)> {
    let (c1, c2) = traj.snapshot(i);
    let pd = phase_difference(&c1, &c2, floor)?;
    let metrics = hockey_stick(&pd.r, &pd.phase, &pd.weight, settings);
    Ok((pd, metrics))
}

/// Propagate `pair` up to `t_fs` only and evaluate the hockey-stick metrics.
pub fn hockey_for_pair(cfg: &RunConfig, pair: PotentialPair, t_fs: f64) -> Result<Option<HockeyMetrics>> {
    let wp = cfg.wavepacket_on(pair)?;
    let p = &cfg.propagation;
    let grid = cfg.grid()?;
    let start = grid.r_max() - p.absorber_fraction * (grid.r_max() - grid.r_min());
    let params = PropagationParams::new(&grid, p.dt_au, fs_to_au(t_fs), fs_to_au(t_fs).max(p.dt_au), p.absorber_strength, start)?;
    let traj = propagate_pair(&wp, &params)?;
    let last = traj.len() - 1;
    Ok(hockey_at_index(&traj, last, p.density_floor, &cfg.hockey_settings())?.1)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleMember {
    pub index: usize,
    pub seed: u64,
    pub metrics: Option<HockeyMetrics>,
}

impl EnsembleMember {
    pub fn passes(&self) -> bool {
        self.metrics.is_some_and(|m| m.passes)
    }
}

/// Seed of ensemble member `i`.
pub fn member_seed(cfg: &RunConfig, i: usize) -> u64 {
    cfg.seed.wrapping_mul(1_000_003).wrapping_add(i as u64)
}

/// Perturbed-potential ensemble, one propagation per member in parallel.
pub fn run_ensemble(cfg: &RunConfig) -> Result<Vec<EnsembleMember>> {
    let base = cfg.potential_pair()?;
    let e = &cfg.ensemble;
    (0..e.members)
        .into_par_iter()
        .map(|index| {
            let seed = member_seed(cfg, index);
            let pair = base.perturbed(seed, e.fraction)?;
            Ok(EnsembleMember {
                index,
                seed,
                metrics: hockey_for_pair(cfg, pair, e.probe_time_fs)?,
            })
        })
        .collect()
}

pub fn persistence(members: &[EnsembleMember]) -> f64 {
    members.iter().filter(|m| m.passes()).count() as f64 / members.len().max(1) as f64
}

/// KER-binned yield over a set of scan points.
#[derive(Debug, Clone, PartialEq)]
pub struct YieldScan {
    pub axis: ScanAxis,
    pub delays: Vec<f64>,
    pub phases: Vec<f64>,
    pub ker_edges_ev: Vec<f64>,
    /// `y[point][bin]`.
    pub y: Vec<Vec<f64>>,
    /// R-integrated yield per point.
    pub totals: Vec<f64>,
}

impl YieldScan {
    pub fn scan_values(&self) -> &[f64] {
        match self.axis {
            ScanAxis::Delay => &self.delays,
            ScanAxis::Phase => &self.phases,
        }
    }

    pub fn centers(&self) -> Vec<f64> {
        self.ker_edges_ev.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
    }

    /// `y[bin][point]`.
    pub fn by_bin(&self) -> Vec<Vec<f64>> {
        transpose(&self.y)
    }

    pub fn yield_map(&self) -> YieldMap {
        YieldMap {
            ker_edges_ev: self.ker_edges_ev.clone(),
            points: (0..self.y.len())
                .map(|i| ScanPointYield {
                    delay_fs: self.delays[i],
                    phase_rad: self.phases[i],
                    weights: self.y[i].clone(),
                })
                .collect(),
        }
    }

    pub const COLUMNS: [&'static str; 5] = ["delay_fs", "phase_rad", "ker_lo_ev", "ker_hi_ev", "yield"];

    pub fn write(&self, path: &Path, hash: &str, meta: &[String]) -> Result<()> {
        let mut m = vec![format!("axis: {}", self.axis.label())];
        m.extend_from_slice(meta);
        let mut w = TableWriter::create(path, hash, &m, &Self::COLUMNS)?;
        for (i, row) in self.y.iter().enumerate() {
            for (k, v) in row.iter().enumerate() {
                w.row(&[self.delays[i], self.phases[i], self.ker_edges_ev[k], self.ker_edges_ev[k + 1], *v])?;
            }
        }
        w.finish()
    }

    pub fn read(path: &Path) -> Result<Self> {
        let t = read_table(path)?;
        Self::from_table(&t)
    }

    fn from_table(t: &Table) -> Result<Self> {
        let axis = table_axis(t)?;
        let (d, p, lo, hi, y) = (
            t.column("delay_fs")?,
            t.column("phase_rad")?,
            t.column("ker_lo_ev")?,
            t.column("ker_hi_ev")?,
            t.column("yield")?,
        );
        let malformed = |line: usize, reason: &str| Error::Malformed {
            path: t.path.clone(),
            line: line as u64,
            reason: reason.into(),
        };
        let mut edges = Vec::new();
        for k in 0..lo.len() {
            if k > 0 && (d[k] != d[0] || p[k] != p[0]) {
                break;
            }
            edges.push(lo[k]);
        }
        let bins = edges.len();
        if bins == 0 || lo.len() % bins != 0 {
            return Err(malformed(0, "yield table is not a complete point × bin grid"));
        }
        edges.push(hi[bins - 1]);
        let points = lo.len() / bins;
        let mut scan = YieldScan {
            axis,
            delays: Vec::with_capacity(points),
            phases: Vec::with_capacity(points),
            ker_edges_ev: edges,
            y: Vec::with_capacity(points),
            totals: Vec::with_capacity(points),
        };
        for i in 0..points {
            let rows = i * bins..(i + 1) * bins;
            if rows.clone().any(|k| d[k] != d[i * bins] || p[k] != p[i * bins] || lo[k] != scan.ker_edges_ev[k - i * bins]) {
                return Err(malformed(i * bins, "inconsistent scan point or bin edges"));
            }
            scan.delays.push(d[i * bins]);
            scan.phases.push(p[i * bins]);
            scan.y.push(y[rows].to_vec());
            scan.totals.push(scan.y[i].iter().sum());
        }
        Ok(scan)
    }
}

fn transpose(m: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let cols = m.first().map_or(0, Vec::len);
    (0..cols).map(|c| m.iter().map(|r| r[c]).collect()).collect()
}

fn table_axis(t: &Table) -> Result<ScanAxis> {
    match t.meta_value("axis") {
        Some("delay_fs") => Ok(ScanAxis::Delay),
        Some("phase_rad") => Ok(ScanAxis::Phase),
        other => Err(Error::Malformed {
            path: t.path.clone(),
            line: 0,
            reason: format!("missing or unknown axis metadata {other:?}"),
        }),
    }
}

/// Yield at one snapshot and phase, binned in KER.
fn binned_yield(sys: &TwoStateSystem, traj: &Trajectory, i: usize, phi: f64, e_probe: f64, edges: &[f64]) -> Result<(Vec<f64>, f64)> {
    let y = dication_yield_at_index(sys, traj, i, phi, e_probe)?;
    Ok((y.energy_histogram(edges), y.total()))
}

/// Yield versus the controllable phase at `cfg.scan.phase_delay_fs`.
pub fn phase_scan(cfg: &RunConfig, traj: &Trajectory) -> Result<YieldScan> {
    phase_scan_with(cfg, &cfg.system()?, traj)
}

pub fn phase_scan_with(cfg: &RunConfig, sys: &TwoStateSystem, traj: &Trajectory) -> Result<YieldScan> {
    let i = traj.index_at(cfg.scan.phase_delay_fs)?;
    let edges = cfg.ker_edges()?;
    let phases = cfg.phases();
    let rows: Vec<(Vec<f64>, f64)> = phases
        .par_iter()
        .map(|&phi| binned_yield(sys, traj, i, phi, cfg.probe_field(), &edges))
        .collect::<Result<_>>()?;
    Ok(YieldScan {
        axis: ScanAxis::Phase,
        delays: vec![cfg.scan.phase_delay_fs; phases.len()],
        phases,
        ker_edges_ev: edges,
        totals: rows.iter().map(|r| r.1).collect(),
        y: rows.into_iter().map(|r| r.0).collect(),
    })
}

/// Phase-averaged yield versus delay, with the configured ground-state
/// vibration imprinted as a multiplicative modulation.
pub fn delay_scan(cfg: &RunConfig, traj: &Trajectory) -> Result<YieldScan> {
    let sys = cfg.system()?;
    let edges = cfg.ker_edges()?;
    let delays = cfg.delays()?;
    let phis = cfg.averaging_phases();
    let period = cfg.vibration_period_fs();
    let rows: Vec<(Vec<f64>, f64)> = delays
        .par_iter()
        .map(|&tau| {
            let i = traj.index_at(tau)?;
            let mut acc = vec![0.0; edges.len() - 1];
            let mut total = 0.0;
            for &phi in &phis {
                let (h, t) = binned_yield(&sys, traj, i, phi, cfg.probe_field(), &edges)?;
                acc.iter_mut().zip(&h).for_each(|(a, b)| *a += b);
                total += t;
            }
            let f = period.map_or(1.0, |p| 1.0 + cfg.scan.vibration_depth * (2.0 * PI * tau / p).cos()) / phis.len() as f64;
            acc.iter_mut().for_each(|a| *a *= f);
            Ok((acc, total * f))
        })
        .collect::<Result<_>>()?;
    Ok(YieldScan {
        axis: ScanAxis::Delay,
        phases: vec![0.0; delays.len()],
        delays,
        ker_edges_ev: edges,
        totals: rows.iter().map(|r| r.1).collect(),
        y: rows.into_iter().map(|r| r.0).collect(),
    })
}

/// Comparison of the phase fitted from the simulated phase scan with the
/// propagated phase difference at `R = 1/E`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseConsistency {
    pub energy_ev: Vec<f64>,
    pub fitted: Vec<f64>,
    pub propagated: Vec<f64>,
    pub max_abs_difference: f64,
}

pub fn phase_consistency(cfg: &RunConfig, traj: &Trajectory, scan: &YieldScan) -> Result<PhaseConsistency> {
    let i = traj.index_at(scan.delays[0])?;
    let (c1, c2) = traj.snapshot(i);
    let pd = phase_difference(&c1, &c2, cfg.propagation.density_floor)?;
    let fits = fit_phase_scan(&scan.phases, &scan.by_bin(), None, &cfg.fit_settings())?;
    let mut out = PhaseConsistency {
        energy_ev: Vec::new(),
        fitted: Vec::new(),
        propagated: Vec::new(),
        max_abs_difference: 0.0,
    };
    for (f, e) in fits.iter().zip(scan.centers()) {
        if !f.significant {
            continue;
        }
        let r = coulomb_distance(ev_to_hartree(e))?;
        let Some(dphi) = pd.at(r) else { continue };
        let diff = wrap_phase(f.phase - dphi).abs();
        out.energy_ev.push(e);
        out.fitted.push(f.phase);
        out.propagated.push(wrap_phase(dphi));
        out.max_abs_difference = out.max_abs_difference.max(diff);
    }
    if out.energy_ev.is_empty() {
        return Err(Error::NoOverlap);
    }
    Ok(out)
}

/// Result of analysing one phase-scan map.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseAnalysis {
    pub energies: Vec<f64>,
    pub fits: Vec<PhaseFitResult>,
    pub curve: PhaseCurve,
    pub first_moment: Vec<f64>,
    pub harmonic: u32,
    pub hockey: Option<HockeyMetrics>,
}

/// `by_bin[bin][phase]`.
pub fn analyze_phase_map(cfg: &RunConfig, phases: &[f64], energies: &[f64], by_bin: &[Vec<f64>], sigma: Option<&[Vec<f64>]>) -> Result<PhaseAnalysis> {
    let fits = fit_phase_scan(phases, by_bin, sigma, &cfg.fit_settings())?;
    let curve = phase_vs_inverse_energy(&fits, energies);
    let clipped: Vec<Vec<f64>> = by_bin.iter().map(|r| r.iter().map(|v| v.max(0.0)).collect()).collect();
    let first_moment = first_moment(energies, &clipped)?;
    let total: Vec<f64> = (0..phases.len()).map(|k| by_bin.iter().map(|r| r[k]).sum()).collect();
    let harmonic = dominant_harmonic(phases, &total, cfg.analysis.max_harmonic)?;
    // Weight of each point along 1/E: the phase-independent part of its bin.
    let weights: Vec<f64> = curve.offset.iter().map(|w| w.max(0.0)).collect();
    let hockey = hockey_stick(&curve.inverse_energy, &curve.phase, &weights, &cfg.hockey_settings());
    Ok(PhaseAnalysis {
        energies: energies.to_vec(),
        fits,
        curve,
        first_moment,
        harmonic,
        hockey,
    })
}

pub fn analyze_delay_series(cfg: &RunConfig, delays: &[f64], series: &[f64]) -> Result<ModulationSpectrum> {
    modulation_spectrum(delays, series, cfg.analysis.min_periods)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or("none".into(), |x| format!("{x:.4}"))
}

// ---------------------------------------------------------------- commands

#[derive(Debug, Clone, PartialEq)]
pub struct PropagateSummary {
    pub hockey: Vec<(f64, Option<HockeyMetrics>)>,
    pub persistence: Option<f64>,
    pub files: Vec<PathBuf>,
}

pub fn cmd_propagate(ctx: &Context, ensemble: bool) -> Result<PropagateSummary> {
    let cfg = &ctx.config;
    info!("propagating {} fs on {} points", cfg.propagation.total_time_fs, cfg.grid.points);
    let traj = simulate(cfg)?;
    let mut s = write_trajectory_outputs(ctx, &traj)?;
    if ensemble {
        let members = run_ensemble(cfg)?;
        s.files.push(write_ensemble(ctx, &members)?);
        let frac = persistence(&members);
        info!("hockey-stick feature persists in {:.1}% of {} members", 100.0 * frac, members.len());
        s.persistence = Some(frac);
    }
    Ok(s)
}

pub fn write_ensemble(ctx: &Context, members: &[EnsembleMember]) -> Result<PathBuf> {
    let cfg = &ctx.config;
    let path = ctx.path("ensemble.csv");
    let meta = vec![
        format!("members: {}", cfg.ensemble.members),
        format!("fraction: {}", cfg.ensemble.fraction),
        format!("probe_time_fs: {}", cfg.ensemble.probe_time_fs),
    ];
    let mut w = TableWriter::create(&path, &ctx.hash, &meta, &["member", "seed", "r_squared", "departure_rad", "passes"])?;
    for m in members {
        let (r2, dep) = m.metrics.map_or((f64::NAN, f64::NAN), |x| (x.line.r_squared, x.departure));
        w.row(&[m.index as f64, m.seed as f64, r2, dep, m.passes() as u8 as f64])?;
    }
    w.finish()?;
    Ok(path)
}

fn write_trajectory_outputs(ctx: &Context, traj: &Trajectory) -> Result<PropagateSummary> {
    let cfg = &ctx.config;
    let mut files = Vec::new();
    let r = traj.grid.points();
    let floor = cfg.propagation.density_floor;

    let path = ctx.path("potentials.csv");
    let offset = traj.v2.iter().zip(&traj.v1).map(|(a, b)| a - b).fold(f64::INFINITY, f64::min);
    let mut w = ctx.table("potentials.csv", &[], &["r_bohr", "v1_ev", "v2_ev"])?;
    for j in 0..r.len() {
        w.row(&[r[j], hartree_to_ev(traj.v1[j]), hartree_to_ev(traj.v2[j])])?;
    }
    w.finish()?;
    files.push(path);

    let mut density_series = Vec::new();
    let mut phase_series = Vec::new();
    let mut hockey = Vec::new();
    let labels: Vec<String> = cfg.propagation.report_times_fs.iter().map(|t| format!("{t} fs")).collect();
    for &t in &cfg.propagation.report_times_fs {
        let i = traj.index_at(t)?;
        let name = format!("trajectory_t{t:05.1}fs.csv");
        let path = ctx.path(&name);
        let mut w = ctx.table(&name, &[format!("time_fs: {t}")], &["r_bohr", "re_chi1", "im_chi1", "re_chi2", "im_chi2"])?;
        for j in 0..r.len() {
            let (a, b) = (traj.chi1[i][j], traj.chi2[i][j]);
            w.row(&[r[j], a.re, a.im, b.re, b.im])?;
        }
        w.finish()?;
        files.push(path);
        let (pd, metrics) = hockey_at_index(traj, i, floor, &cfg.hockey_settings())?;
        density_series.push((r.clone(), traj.chi1[i].iter().map(|c| c.norm_sqr()).collect::<Vec<f64>>()));
        phase_series.push(pd);
        hockey.push((t, metrics));
    }

    let path = ctx.path("phase_difference.csv");
    let mut w = ctx.table("phase_difference.csv", &[format!("density_floor: {floor}")], &["time_fs", "r_bohr", "inverse_energy_per_ev", "dphi_rad", "weight"])?;
    for (t, pd) in cfg.propagation.report_times_fs.iter().zip(&phase_series) {
        for k in 0..pd.len() {
            w.row(&[*t, pd.r[k], 1.0 / hartree_to_ev(1.0 / pd.r[k]), pd.phase[k], pd.weight[k]])?;
        }
    }
    w.finish()?;
    files.push(path);

    let path = ctx.path("hockey.csv");
    let mut w = ctx.table("hockey.csv", &[], &["time_fs", "r_squared", "departure_rad", "slope_rad_per_bohr", "passes"])?;
    for (t, m) in &hockey {
        match m {
            Some(m) => w.row(&[*t, m.line.r_squared, m.departure, m.line.slope, m.passes as u8 as f64])?,
            None => w.row(&[*t, f64::NAN, f64::NAN, f64::NAN, 0.0])?,
        }
    }
    w.finish()?;
    files.push(path);

    let samples = decoherence_decomposition(traj)?;
    let path = ctx.path("decoherence.csv");
    let mut w = ctx.table("decoherence.csv", &[], &["time_fs", "overlap", "contrast", "population1", "population2"])?;
    for s in &samples {
        w.row(&[s.time_fs, s.overlap, s.contrast.unwrap_or(f64::NAN), s.population1, s.population2])?;
    }
    w.finish()?;
    files.push(path);

    if ctx.plots {
        let series: Vec<Series> = labels.iter().zip(&density_series).map(|(l, d)| Series::new(l, &d.0, &d.1)).collect();
        let p = ctx.path("density.svg");
        line_plot(&p, "State-1 density", "R (bohr)", "|chi1|^2", &series)?;
        files.push(p);
        let series: Vec<Series> = labels.iter().zip(&phase_series).map(|(l, pd)| Series::new(l, &pd.r, &pd.phase)).collect();
        let p = ctx.path("phase_difference.svg");
        line_plot(&p, "Phase difference", "R = 1/E (bohr)", "dphi (rad)", &series)?;
        files.push(p);
        let v1: Vec<f64> = traj.v1.iter().map(|v| hartree_to_ev(*v)).collect();
        let v2: Vec<f64> = traj.v2.iter().map(|v| hartree_to_ev(v - offset)).collect();
        let cut = r.iter().position(|x| *x > 12.0).unwrap_or(r.len());
        let p = ctx.path("potentials.svg");
        line_plot(&p, "Potentials (V2 without offset)", "R (bohr)", "V (eV)", &[Series::new("V1", &r[..cut], &v1[..cut]), Series::new("V2", &r[..cut], &v2[..cut])])?;
        files.push(p);
        let t: Vec<f64> = samples.iter().map(|s| s.time_fs).collect();
        let ov: Vec<f64> = samples.iter().map(|s| s.overlap).collect();
        let ct: Vec<f64> = samples.iter().map(|s| s.contrast.unwrap_or(f64::NAN)).collect();
        let p = ctx.path("decoherence.svg");
        line_plot(&p, "Decoherence channels", "t (fs)", "", &[Series::new("|overlap|", &t, &ov), Series::new("dephasing contrast", &t, &ct)])?;
        files.push(p);
    }
    for (t, m) in &hockey {
        match m {
            Some(m) => info!("t = {t} fs: leading-edge R^2 = {:.5}, trailing departure = {:.3} rad", m.line.r_squared, m.departure),
            None => info!("t = {t} fs: phase difference too short for a line fit"),
        }
    }
    Ok(PropagateSummary {
        hockey,
        persistence: None,
        files,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScanChoice {
    Delay,
    Phase,
    Both,
}

impl ScanChoice {
    pub fn axes(self) -> Vec<ScanAxis> {
        match self {
            ScanChoice::Delay => vec![ScanAxis::Delay],
            ScanChoice::Phase => vec![ScanAxis::Phase],
            ScanChoice::Both => vec![ScanAxis::Delay, ScanAxis::Phase],
        }
    }
}

pub fn yield_file_name(axis: ScanAxis) -> String {
    format!("yield_{}.csv", axis_stem(axis))
}

fn axis_stem(axis: ScanAxis) -> &'static str {
    match axis {
        ScanAxis::Delay => "delay",
        ScanAxis::Phase => "phase",
    }
}

pub fn cmd_scan(ctx: &Context, choice: ScanChoice) -> Result<Vec<YieldScan>> {
    let traj = simulate(&ctx.config)?;
    choice.axes().into_iter().map(|axis| scan_and_write(ctx, &traj, axis)).collect()
}

fn scan_and_write(ctx: &Context, traj: &Trajectory, axis: ScanAxis) -> Result<YieldScan> {
    let cfg = &ctx.config;
    let (scan, meta) = match axis {
        ScanAxis::Delay => (
            delay_scan(cfg, traj)?,
            vec![
                format!("phase_average: {}", cfg.scan.phases_per_delay),
                format!("vibration_period_fs: {}", fmt_opt(cfg.vibration_period_fs())),
            ],
        ),
        ScanAxis::Phase => (phase_scan(cfg, traj)?, vec![format!("delay_fs: {}", cfg.scan.phase_delay_fs)]),
    };
    let name = yield_file_name(axis);
    scan.write(&ctx.path(&name), &ctx.hash, &meta)?;
    if ctx.plots {
        plot_scan(ctx, &scan, &format!("yield_{}", axis_stem(axis)), "yield")?;
    }
    info!("wrote {name} ({} points x {} bins)", scan.y.len(), scan.ker_edges_ev.len() - 1);
    Ok(scan)
}

fn plot_scan(ctx: &Context, scan: &YieldScan, stem: &str, what: &str) -> Result<()> {
    let centers = scan.centers();
    let x = scan.scan_values();
    let label = scan.axis.label();
    heatmap(&ctx.path(&format!("{stem}.svg")), &format!("{what} vs KER and {label}"), label, "KER (eV)", x, &centers, &scan.by_bin())?;
    line_plot(&ctx.path(&format!("{stem}_total.svg")), &format!("KER-integrated {what}"), label, what, &[Series::new(what, x, &scan.totals)])
}

pub fn events_file_name(axis: ScanAxis) -> String {
    format!("events_{}.csv", axis_stem(axis))
}

/// Generate events for the given axis, from `yield_file` when supplied and
/// otherwise from a fresh model scan.
pub fn cmd_synth(ctx: &Context, axis: ScanAxis, yield_file: Option<&Path>) -> Result<PathBuf> {
    let cfg = &ctx.config;
    let scan = match yield_file {
        Some(p) => {
            let s = YieldScan::read(p)?;
            if s.axis != axis {
                return Err(Error::invalid("--axis", format!("{} holds a {} scan", p.display(), s.axis.label())));
            }
            s
        }
        None => {
            let traj = simulate(cfg)?;
            match axis {
                ScanAxis::Delay => delay_scan(cfg, &traj)?,
                ScanAxis::Phase => phase_scan(cfg, &traj)?,
            }
        }
    };
    let shots = match axis {
        ScanAxis::Delay => cfg.events.shots_per_delay,
        ScanAxis::Phase => cfg.events.shots_per_phase,
    };
    let model = cfg.event_model()?;
    let map = scan.yield_map();
    let gen = EventGenerator::new(&model, &map, shots, cfg.seed)?;
    let path = ctx.path(&events_file_name(axis));
    let mut w = EventWriter::create(&path, &ctx.hash, &model.species, &model.calibration)?;
    gen.for_each_chunk(2 * rayon::current_num_threads(), |chunk| chunk.iter().try_for_each(|s| w.write_shot(s)))?;
    w.finish()?;
    info!("wrote {} shots to {}", gen.total_shots(), path.display());
    Ok(path)
}

/// Single pass over an event file, holding at most one batch of shots.
pub fn stream_covariance(path: &Path, cfg: &RunConfig, axis: ScanAxis) -> Result<CovarianceMap> {
    let reader = EventReader::open(path)?;
    let settings = cfg.covariance_settings(reader.species(), axis)?;
    let mut acc = CovarianceAccumulator::new(settings);
    let batch_len = ACCUMULATION_CHUNK * 4 * rayon::current_num_threads();
    let mut batch = Vec::with_capacity(batch_len);
    for shot in reader {
        batch.push(shot?);
        if batch.len() == batch_len {
            acc.add_shots(&batch)?;
            batch.clear();
        }
    }
    acc.add_shots(&batch)?;
    acc.finish()
}

pub fn covmap_file_name(axis: ScanAxis) -> String {
    format!("covmap_{}.csv", axis_stem(axis))
}

pub fn write_covmap(path: &Path, hash: &str, map: &CovarianceMap, meta: &[String]) -> Result<()> {
    let mut m = vec![format!("axis: {}", map.axis.label())];
    m.extend_from_slice(meta);
    let mut w = TableWriter::create(path, hash, &m, &["scan_value", "ker_lo_ev", "ker_hi_ev", "covariance", "sigma", "shots"])?;
    for (i, v) in map.scan_values.iter().enumerate() {
        for k in 0..map.ker_edges_ev.len() - 1 {
            w.row(&[*v, map.ker_edges_ev[k], map.ker_edges_ev[k + 1], map.cov[i][k], map.sigma[i][k], map.shots[i] as f64])?;
        }
    }
    w.finish()
}

pub fn read_covmap(path: &Path) -> Result<CovarianceMap> {
    let t = read_table(path)?;
    let axis = table_axis(&t)?;
    let (v, lo, hi, c, s, n) = (
        t.column("scan_value")?,
        t.column("ker_lo_ev")?,
        t.column("ker_hi_ev")?,
        t.column("covariance")?,
        t.column("sigma")?,
        t.column("shots")?,
    );
    let bins = v.iter().take_while(|x| **x == v[0]).count();
    if bins == 0 || v.len() % bins != 0 {
        return Err(Error::Malformed {
            path: path.to_path_buf(),
            line: 0,
            reason: "covariance table is not a complete point × bin grid".into(),
        });
    }
    let mut edges = lo[..bins].to_vec();
    edges.push(hi[bins - 1]);
    let points = v.len() / bins;
    Ok(CovarianceMap {
        axis,
        ker_edges_ev: edges,
        scan_values: (0..points).map(|i| v[i * bins]).collect(),
        shots: (0..points).map(|i| n[i * bins] as u64).collect(),
        cov: (0..points).map(|i| c[i * bins..(i + 1) * bins].to_vec()).collect(),
        sigma: (0..points).map(|i| s[i * bins..(i + 1) * bins].to_vec()).collect(),
    })
}

/// Scan axis of an event file: a phase scan has a single delay.
pub fn infer_axis(path: &Path) -> Result<ScanAxis> {
    let mut delays = Vec::new();
    for shot in EventReader::open(path)? {
        let d = shot?.delay_fs;
        if !delays.contains(&d) {
            delays.push(d);
            if delays.len() > 1 {
                return Ok(ScanAxis::Delay);
            }
        }
    }
    Ok(ScanAxis::Phase)
}

pub fn cmd_covmap(ctx: &Context, events: &Path, axis: Option<ScanAxis>) -> Result<(PathBuf, CovarianceMap)> {
    let axis = match axis {
        Some(a) => a,
        None => infer_axis(events)?,
    };
    let map = stream_covariance(events, &ctx.config, axis)?;
    let path = ctx.path(&covmap_file_name(axis));
    let eps = ctx.config.covariance.gate_epsilon_au;
    write_covmap(&path, &ctx.hash, &map, &[format!("source: {}", file_label(events)), format!("gate_epsilon_au: {eps}")])?;
    if ctx.plots {
        let stem = format!("covmap_{}", axis_stem(axis));
        let centers = map.centers();
        heatmap(&ctx.path(&format!("{stem}.svg")), "KER-resolved covariance", axis.label(), "KER (eV)", &map.scan_values, &centers, &transpose(&map.cov))?;
        let totals: Vec<f64> = map.cov.iter().map(|r| r.iter().sum()).collect();
        line_plot(&ctx.path(&format!("{stem}_total.svg")), "KER-integrated covariance", axis.label(), "covariance", &[Series::new("cov", &map.scan_values, &totals)])?;
    }
    info!("wrote {} ({} scan points)", path.display(), map.scan_values.len());
    Ok((path, map))
}

#[derive(Debug, Clone, PartialEq)]
pub enum AnalysisReport {
    Delay { source: PathBuf, spectrum: ModulationSpectrum },
    Phase { source: PathBuf, analysis: PhaseAnalysis },
}

/// A map read back from either a yield table or a covariance table.
struct LoadedMap {
    axis: ScanAxis,
    scan_values: Vec<f64>,
    energies: Vec<f64>,
    /// `[point][bin]`.
    values: Vec<Vec<f64>>,
    sigma: Option<Vec<Vec<f64>>>,
}

fn load_map(path: &Path) -> Result<LoadedMap> {
    let t = read_table(path)?;
    if t.column_index("covariance").is_ok() {
        let m = read_covmap(path)?;
        Ok(LoadedMap {
            axis: m.axis,
            energies: m.centers(),
            scan_values: m.scan_values,
            values: m.cov,
            sigma: Some(m.sigma),
        })
    } else {
        let s = YieldScan::from_table(&t)?;
        Ok(LoadedMap {
            axis: s.axis,
            energies: s.centers(),
            scan_values: s.scan_values().to_vec(),
            values: s.y,
            sigma: None,
        })
    }
}

pub fn cmd_analyze(ctx: &Context, inputs: &[PathBuf]) -> Result<Vec<AnalysisReport>> {
    let cfg = &ctx.config;
    let mut reports = Vec::new();
    for input in inputs {
        let map = load_map(input)?;
        let stem = input.file_stem().and_then(|s| s.to_str()).unwrap_or("map").to_string();
        match map.axis {
            ScanAxis::Delay => {
                let series: Vec<f64> = map.values.iter().map(|r| r.iter().sum()).collect();
                let spectrum = analyze_delay_series(cfg, &map.scan_values, &series)?;
                let name = format!("spectrum_{stem}.csv");
                let meta = [format!("source: {}", file_label(input)), format!("dominant_period_fs: {}", fmt_opt(spectrum.dominant_period))];
                let mut w = ctx.table(&name, &meta, &["frequency_per_fs", "period_fs", "amplitude"])?;
                for (f, a) in spectrum.frequencies.iter().zip(&spectrum.amplitudes) {
                    w.row(&[*f, if *f > 0.0 { 1.0 / f } else { f64::INFINITY }, *a])?;
                }
                w.finish()?;
                if ctx.plots {
                    let cut = spectrum.frequencies.iter().position(|f| *f > 0.1).unwrap_or(spectrum.frequencies.len());
                    line_plot(
                        &ctx.path(&format!("spectrum_{stem}.svg")),
                        "Fourier analysis of the phase-averaged yield",
                        "frequency (1/fs)",
                        "amplitude",
                        &[Series::new("spectrum", &spectrum.frequencies[1..cut], &spectrum.amplitudes[1..cut])],
                    )?;
                }
                info!("{stem}: dominant period {} fs", fmt_opt(spectrum.dominant_period));
                reports.push(AnalysisReport::Delay {
                    source: input.clone(),
                    spectrum,
                });
            }
            ScanAxis::Phase => {
                let by_bin = transpose(&map.values);
                let sigma = map.sigma.as_ref().map(|s| transpose(s));
                let analysis = match analyze_phase_map(cfg, &map.scan_values, &map.energies, &by_bin, sigma.as_deref()) {
                    Ok(a) => a,
                    Err(Error::ZeroInput(_)) if sigma.is_some() => {
                        warn!("{stem}: a phase column has no positive covariance; first moment uses absolute values");
                        let abs: Vec<Vec<f64>> = by_bin.iter().map(|r| r.iter().map(|v| v.abs()).collect()).collect();
                        analyze_phase_map(cfg, &map.scan_values, &map.energies, &abs, sigma.as_deref())?
                    }
                    Err(e) => return Err(e),
                };
                write_phase_analysis(ctx, &stem, input, &map.scan_values, &analysis)?;
                info!(
                    "{stem}: {} significant bins, {} modulation(s) per 2pi",
                    analysis.curve.phase.len(),
                    analysis.harmonic
                );
                reports.push(AnalysisReport::Phase {
                    source: input.clone(),
                    analysis,
                });
            }
        }
    }
    Ok(reports)
}

fn write_phase_analysis(ctx: &Context, stem: &str, input: &Path, phases: &[f64], a: &PhaseAnalysis) -> Result<()> {
    let src = format!("source: {}", file_label(input));
    let mut w = ctx.table(
        &format!("fits_{stem}.csv"),
        std::slice::from_ref(&src),
        &["ker_ev", "c0", "c1", "dphi_rad", "residual_rms", "sigma_c1", "sigma_dphi", "significant"],
    )?;
    for (e, f) in a.energies.iter().zip(&a.fits) {
        w.row(&[*e, f.c0, f.c1, f.phase, f.residual_rms, f.sigma_c1, f.sigma_phase, f.significant as u8 as f64])?;
    }
    w.finish()?;
    let mut w = ctx.table(&format!("first_moment_{stem}.csv"), std::slice::from_ref(&src), &["phase_rad", "mean_ker_ev"])?;
    for (p, m) in phases.iter().zip(&a.first_moment) {
        w.row(&[*p, *m])?;
    }
    w.finish()?;
    let meta = [
        src,
        format!("modulations_per_2pi: {}", a.harmonic),
        format!("hockey_r_squared: {}", fmt_opt(a.hockey.map(|h| h.line.r_squared))),
        format!("hockey_departure_rad: {}", fmt_opt(a.hockey.map(|h| h.departure))),
    ];
    let c = &a.curve;
    let mut w = ctx.table(&format!("phase_vs_inverse_energy_{stem}.csv"), &meta, &["inverse_energy_per_ev", "ker_ev", "dphi_unwrapped_rad", "amplitude"])?;
    for k in 0..c.phase.len() {
        w.row(&[c.inverse_energy[k], c.energy[k], c.phase[k], c.amplitude[k]])?;
    }
    w.finish()?;
    if ctx.plots {
        line_plot(
            &ctx.path(&format!("first_moment_{stem}.svg")),
            "First moment of the KER distribution",
            "phase (rad)",
            "<KER> (eV)",
            &[Series::new("<E>", phases, &a.first_moment)],
        )?;
        line_plot(
            &ctx.path(&format!("phase_vs_inverse_energy_{stem}.svg")),
            "Fitted phase vs 1/E",
            "1/E (1/eV)",
            "dPhi (rad)",
            &[Series::new("dPhi", &c.inverse_energy, &c.phase)],
        )?;
    }
    Ok(())
}

pub fn describe_trajectory(traj: &Trajectory) -> String {
    format!(
        "{} snapshots from 0 to {:.1} fs on {} points",
        traj.len(),
        au_to_fs(*traj.times.last().unwrap_or(&0.0)),
        traj.grid.len()
    )
}

/// Propagate, scan both axes, synthesise and covariance-map both event
/// streams, then analyse all four maps. Returns the trajectory for reuse.
pub fn data_chain(ctx: &Context) -> Result<Trajectory> {
    let cfg = &ctx.config;
    let traj = simulate(cfg)?;
    write_trajectory_outputs(ctx, &traj)?;
    let scans = [ScanAxis::Delay, ScanAxis::Phase]
        .into_iter()
        .map(|axis| scan_and_write(ctx, &traj, axis))
        .collect::<Result<Vec<_>>>()?;
    let mut inputs: Vec<PathBuf> = scans.iter().map(|s| ctx.path(&yield_file_name(s.axis))).collect();
    for axis in [ScanAxis::Delay, ScanAxis::Phase] {
        let events = cmd_synth(ctx, axis, None)?;
        let (path, _) = cmd_covmap(ctx, &events, Some(axis))?;
        inputs.push(path);
    }
    cmd_analyze(ctx, &inputs)?;
    Ok(traj)
}

/// Full data chain plus every acceptance criterion; the summary goes to
/// `summary.txt` and a failed criterion is reported as an error.
pub fn cmd_reproduce(ctx: &Context) -> Result<Vec<crate::acceptance::Outcome>> {
    let started = std::time::Instant::now();
    let traj = data_chain(ctx)?;
    let (outcomes, members) = crate::acceptance::run_all(ctx, &traj, started);
    if !members.is_empty() {
        write_ensemble(ctx, &members)?;
    }
    crate::acceptance::write_summary(&ctx.path("summary.txt"), &ctx.hash, &outcomes)?;
    let failed: Vec<String> = outcomes.iter().filter(|o| !o.passed).map(|o| o.id.to_string()).collect();
    if failed.is_empty() {
        Ok(outcomes)
    } else {
        Err(Error::Acceptance(format!("criteria {} failed; see {}", failed.join(", "), ctx.path("summary.txt").display())))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick() -> RunConfig {
        let mut cfg = RunConfig::default();
        cfg.propagation.total_time_fs = 100.0;
        cfg.propagation.report_times_fs = vec![0.0, 95.0];
        cfg.scan.delay_stop_fs = 100.0;
        cfg.scan.ker_bins = 54;
        cfg.events.shots_per_delay = 50;
        cfg.events.shots_per_phase = 200;
        cfg
    }

    #[test]
    fn yield_scan_round_trip() {
        let cfg = quick();
        let traj = simulate(&cfg).unwrap();
        let dir = tempfile::tempdir().unwrap();
        for scan in [phase_scan(&cfg, &traj).unwrap(), delay_scan(&cfg, &traj).unwrap()] {
            let p = dir.path().join("y.csv");
            scan.write(&p, "h", &[]).unwrap();
            let back = YieldScan::read(&p).unwrap();
            assert_eq!(back.y, scan.y);
            assert_eq!(back.ker_edges_ev, scan.ker_edges_ev);
            assert_eq!(back.axis, scan.axis);
        }
    }

    #[test]
    fn commands_chain() {
        let dir = tempfile::tempdir().unwrap();
        let mut ctx = Context::new(quick(), dir.path()).unwrap();
        ctx.plots = false;
        let s = cmd_propagate(&ctx, false).unwrap();
        assert!(s.files.iter().all(|f| f.exists()));
        let scans = cmd_scan(&ctx, ScanChoice::Both).unwrap();
        assert_eq!(scans.len(), 2);
        let ev = cmd_synth(&ctx, ScanAxis::Phase, Some(&ctx.path("yield_phase.csv"))).unwrap();
        assert!(cmd_synth(&ctx, ScanAxis::Delay, Some(&ctx.path("yield_phase.csv"))).is_err());
        let (cov, map) = cmd_covmap(&ctx, &ev, None).unwrap();
        assert_eq!(map.axis, ScanAxis::Phase);
        assert_eq!(read_covmap(&cov).unwrap(), map);
        let reports = cmd_analyze(&ctx, &[ctx.path("yield_phase.csv"), ctx.path("yield_delay.csv")]).unwrap();
        match &reports[0] {
            AnalysisReport::Phase { analysis, .. } => assert_eq!(analysis.harmonic, 1),
            other => panic!("{other:?}"),
        }
        assert!(matches!(reports[1], AnalysisReport::Delay { .. }));
    }
}
