//! Run configuration. The file is TOML with one table per section; every
//! key has a default, unknown keys are rejected, and `config_version`
//! versions the layout.
//!
//! Lengths in the file are in Å, energies in eV, times in fs unless the key
//! name says otherwise (`dt_au`, `p0_au`, `gate_epsilon_au`).

use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::analysis::{FitSettings, HockeySettings};
use crate::coherence::TwoStateSystem;
use crate::covariance::{CovarianceSettings, ScanAxis};
use crate::events::{DetectorBlur, DetectorCalibration, EventModel, Species, SpeciesTable};
use crate::grid::SpatialGrid;
use crate::io::short_hash;
use crate::potential::{PotentialCurve, PotentialPair};
use crate::propagator::{PropagationParams, TwoStateWavepacket};
use crate::shaper::{PulseSpec, ShaperMask};
use crate::units::{
    angstrom_to_bohr, bohr_to_angstrom, ev_to_hartree, fs_to_au, wavenumber_to_period_fs, PLANCK_EV_FS, SPEED_OF_LIGHT_NM_PER_FS,
};
use crate::wavefunction::Wavefunction;
use crate::{Error, Result};

pub const CONFIG_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub config_version: u32,
    /// Master seed for event generation and ensembles.
    pub seed: u64,
    pub grid: GridConfig,
    pub potential: PotentialConfig,
    pub wavepacket: WavepacketConfig,
    pub propagation: PropagationConfig,
    pub pulse: PulseConfig,
    pub mask: MaskConfig,
    pub system: SystemConfig,
    pub scan: ScanConfig,
    pub events: EventsConfig,
    pub detector: DetectorConfig,
    pub species: Vec<SpeciesConfig>,
    pub covariance: CovarianceConfig,
    pub analysis: AnalysisConfig,
    pub ensemble: EnsembleConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub r_min_bohr: f64,
    pub r_max_bohr: f64,
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PotentialConfig {
    /// Spline control points of the lower surface as `[R Å, V eV]`.
    pub control_points: Vec<[f64; 2]>,
    /// The upper surface is the lower one with every control energy scaled
    /// by this factor, shifted by `offset_ev`.
    pub upper_scale: f64,
    /// Constant offset of the upper surface; defaults to the photon energy.
    pub offset_ev: Option<f64>,
    pub perturb_fraction: f64,
    pub perturb_seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WavepacketConfig {
    pub r0_angstrom: f64,
    pub sigma_angstrom: f64,
    pub p0_au: f64,
    /// Reduced mass of the dissociation coordinate; defaults to CF3–COCH3.
    pub mass_u: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PropagationConfig {
    pub dt_au: f64,
    pub total_time_fs: f64,
    pub snapshot_interval_fs: f64,
    /// Absorber strength in inverse atomic time; zero disables it.
    pub absorber_strength: f64,
    /// Fraction of the grid, at the outer edge, covered by the absorber.
    pub absorber_fraction: f64,
    pub density_floor: f64,
    /// Snapshot times written and plotted by `propagate`.
    pub report_times_fs: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PulseConfig {
    pub wavelength_nm: f64,
    pub fwhm_fs: f64,
    pub amplitude: f64,
    pub samples: usize,
    pub dt_fs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MaskConfig {
    pub a_tot: f64,
    pub a_r: f64,
    pub tau_fs: f64,
    pub phi_l_rad: f64,
    /// Locking frequency; defaults to the carrier.
    pub nu_l_phz: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SystemConfig {
    /// Complex amplitudes as `[re, im]`.
    pub a1: [f64; 2],
    pub a2: [f64; 2],
    pub q1f: [f64; 2],
    pub q2f: [f64; 2],
    pub pump_order: u32,
    pub probe_order: u32,
    pub photon_separation: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScanConfig {
    pub delay_start_fs: f64,
    pub delay_stop_fs: f64,
    pub delay_step_fs: f64,
    /// Controllable phases averaged at each delay of a delay scan.
    pub phases_per_delay: usize,
    /// Fixed delay of the phase scan.
    pub phase_delay_fs: f64,
    pub phase_points: usize,
    /// Number of 2π periods covered by the phase scan.
    pub phase_periods: u32,
    pub ker_min_ev: f64,
    pub ker_max_ev: f64,
    pub ker_bins: usize,
    /// Ground-state vibration imprinted on the delay-scan yield as
    /// `1 + depth cos(2π τ / T)`; zero depth disables it.
    pub vibration_wavenumber: f64,
    pub vibration_depth: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BackgroundRate {
    pub species: u32,
    pub rate: f64,
}

impl Default for BackgroundRate {
    fn default() -> Self {
        BackgroundRate { species: 0, rate: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EventsConfig {
    pub fragment_a: u32,
    pub fragment_b: u32,
    pub pair_probability: f64,
    pub temperature_k: f64,
    pub shots_per_delay: u64,
    pub shots_per_phase: u64,
    pub blur_xy_mm: f64,
    pub blur_t_ns: f64,
    pub background: Vec<BackgroundRate>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectorConfig {
    pub cx_mm_per_au: f64,
    pub cy_mm_per_au: f64,
    pub ct_ns_per_au: f64,
    /// Time-of-flight offsets are `tof_scale_ns · sqrt(m/q)` unless listed
    /// explicitly per species.
    pub tof_scale_ns: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpeciesConfig {
    pub id: u32,
    pub name: String,
    pub mass_u: f64,
    pub charge: f64,
    pub t0_ns: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CovarianceConfig {
    /// Momentum-conservation gate `|p_A + p_B| < ε`; zero disables it.
    pub gate_epsilon_au: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisConfig {
    pub min_periods: f64,
    pub significance: f64,
    pub min_relative_amplitude: f64,
    pub max_harmonic: u32,
    pub hockey_lead_from: f64,
    pub hockey_lead_to: f64,
    pub hockey_trail_to: f64,
    pub hockey_min_r_squared: f64,
    pub hockey_min_departure_rad: f64,
    /// Largest accepted |ΔΦ(E) - Δφ(1/E)| in the end-to-end comparison.
    pub phase_agreement_rad: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnsembleConfig {
    pub members: usize,
    pub fraction: f64,
    pub min_persistence: f64,
    /// Time at which each member's phase difference is evaluated.
    pub probe_time_fs: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            config_version: CONFIG_VERSION,
            seed: 1,
            grid: GridConfig::default(),
            potential: PotentialConfig::default(),
            wavepacket: WavepacketConfig::default(),
            propagation: PropagationConfig::default(),
            pulse: PulseConfig::default(),
            mask: MaskConfig::default(),
            system: SystemConfig::default(),
            scan: ScanConfig::default(),
            events: EventsConfig::default(),
            detector: DetectorConfig::default(),
            species: SpeciesTable::default()
                .iter()
                .map(|s| SpeciesConfig {
                    id: s.id,
                    name: s.name.clone(),
                    mass_u: s.mass_u,
                    charge: s.charge,
                    t0_ns: None,
                })
                .collect(),
            covariance: CovarianceConfig::default(),
            analysis: AnalysisConfig::default(),
            ensemble: EnsembleConfig::default(),
        }
    }
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            r_min_bohr: 1.0,
            r_max_bohr: 60.0,
            points: 2048,
        }
    }
}

impl Default for PotentialConfig {
    fn default() -> Self {
        // Roll-down, minimum, barrier and final roll-down, placed in bohr.
        let points = [(2.4, 0.0), (3.0, -0.9), (3.8, -0.6), (4.6, -2.5)];
        PotentialConfig {
            control_points: points.iter().map(|&(r, v)| [bohr_to_angstrom(r), v]).collect(),
            upper_scale: 1.04,
            offset_ev: None,
            perturb_fraction: 0.0,
            perturb_seed: 0,
        }
    }
}

impl Default for WavepacketConfig {
    fn default() -> Self {
        WavepacketConfig {
            r0_angstrom: bohr_to_angstrom(2.5),
            sigma_angstrom: bohr_to_angstrom(0.1),
            p0_au: 0.0,
            mass_u: None,
        }
    }
}

impl Default for PropagationConfig {
    fn default() -> Self {
        PropagationConfig {
            dt_au: 0.5,
            total_time_fs: 400.0,
            snapshot_interval_fs: 1.0,
            absorber_strength: 0.01,
            absorber_fraction: 0.1,
            density_floor: 1e-4,
            report_times_fs: vec![0.0, 25.0, 50.0, 75.0, 95.0],
        }
    }
}

impl Default for PulseConfig {
    fn default() -> Self {
        PulseConfig {
            wavelength_nm: 800.0,
            fwhm_fs: 7.0,
            amplitude: 1.0,
            samples: 4096,
            dt_fs: 0.125,
        }
    }
}

impl Default for MaskConfig {
    fn default() -> Self {
        MaskConfig {
            a_tot: 1.0,
            a_r: 1.0,
            tau_fs: 95.0,
            phi_l_rad: 0.0,
            nu_l_phz: None,
        }
    }
}

impl Default for SystemConfig {
    fn default() -> Self {
        let a = std::f64::consts::FRAC_1_SQRT_2;
        SystemConfig {
            a1: [a, 0.0],
            a2: [a, 0.0],
            q1f: [1.0, 0.0],
            q2f: [1.0, 0.0],
            pump_order: 4,
            probe_order: 4,
            photon_separation: 1,
        }
    }
}

impl Default for ScanConfig {
    fn default() -> Self {
        ScanConfig {
            delay_start_fs: 0.0,
            delay_stop_fs: 400.0,
            delay_step_fs: 2.0,
            phases_per_delay: 16,
            phase_delay_fs: 95.0,
            phase_points: 32,
            phase_periods: 1,
            ker_min_ev: 0.5,
            ker_max_ev: 14.0,
            ker_bins: 270,
            vibration_wavenumber: 1189.0,
            vibration_depth: 0.3,
        }
    }
}

impl Default for EventsConfig {
    fn default() -> Self {
        EventsConfig {
            fragment_a: 0,
            fragment_b: 1,
            pair_probability: 0.5,
            temperature_k: 300.0,
            shots_per_delay: 2000,
            shots_per_phase: 4000,
            blur_xy_mm: 0.0,
            blur_t_ns: 0.0,
            background: vec![BackgroundRate { species: 0, rate: 4.0 }, BackgroundRate { species: 1, rate: 4.0 }],
        }
    }
}

impl Default for DetectorConfig {
    fn default() -> Self {
        DetectorConfig {
            cx_mm_per_au: 0.25,
            cy_mm_per_au: 0.25,
            ct_ns_per_au: -0.5,
            tof_scale_ns: 1000.0,
        }
    }
}

impl Default for CovarianceConfig {
    fn default() -> Self {
        CovarianceConfig { gate_epsilon_au: 5.0 }
    }
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig {
            min_periods: 3.0,
            significance: 3.0,
            min_relative_amplitude: 0.01,
            max_harmonic: 4,
            hockey_lead_from: 0.5,
            hockey_lead_to: 0.99,
            hockey_trail_to: 0.1,
            hockey_min_r_squared: 0.99,
            hockey_min_departure_rad: 0.3,
            phase_agreement_rad: 0.1,
        }
    }
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        EnsembleConfig {
            members: 100,
            fraction: 0.05,
            min_persistence: 0.9,
            probe_time_fs: 95.0,
        }
    }
}

fn complex(v: [f64; 2]) -> Complex64 {
    Complex64::new(v[0], v[1])
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(name, format!("{v} must be positive")))
    }
}

/// Evenly spaced samples `start, start + step, ...` up to and including `stop`.
pub fn inclusive_range(name: &str, start: f64, stop: f64, step: f64) -> Result<Vec<f64>> {
    positive(name, step)?;
    if !(stop >= start) {
        return Err(Error::invalid(name, format!("stop {stop} is before start {start}")));
    }
    let n = ((stop - start) / step + 1e-9).floor() as usize;
    Ok((0..=n).map(|k| start + k as f64 * step).collect())
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string().trim().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        let body = toml::to_string(self).expect("configuration serialises");
        format!("# wpcoh run configuration\n{body}")
    }

    /// Hash of the canonical serialisation; embedded in every output file.
    pub fn hash(&self) -> String {
        short_hash(toml::to_string(self).expect("configuration serialises").as_bytes())
    }

    pub fn validate(&self) -> Result<()> {
        if self.config_version != CONFIG_VERSION {
            return Err(Error::invalid(
                "config_version",
                format!("unsupported version {} (expected {CONFIG_VERSION})", self.config_version),
            ));
        }
        self.grid()?;
        self.potential_pair()?;
        self.wavepacket()?;
        self.propagation_params()?;
        let p = &self.propagation;
        if !(p.absorber_fraction > 0.0 && p.absorber_fraction < 1.0) {
            return Err(Error::invalid("propagation.absorber_fraction", "must be in (0, 1)"));
        }
        if !(p.density_floor > 0.0 && p.density_floor < 1.0) {
            return Err(Error::invalid("propagation.density_floor", "must be in (0, 1)"));
        }
        for &t in &p.report_times_fs {
            if !(0.0..=p.total_time_fs).contains(&t) {
                return Err(Error::invalid("propagation.report_times_fs", format!("{t} fs is outside the run")));
            }
        }
        self.pulse()?;
        self.mask()?;
        self.system()?;
        positive("pulse.amplitude", self.pulse.amplitude)?;
        let s = &self.scan;
        let delays = self.delays()?;
        if *delays.last().unwrap() > p.total_time_fs + 1e-9 {
            return Err(Error::invalid("scan.delay_stop_fs", "must not exceed propagation.total_time_fs"));
        }
        if s.phase_delay_fs > p.total_time_fs || s.phase_delay_fs < 0.0 {
            return Err(Error::invalid("scan.phase_delay_fs", "must lie inside propagation.total_time_fs"));
        }
        if s.phases_per_delay < 3 {
            return Err(Error::invalid("scan.phases_per_delay", "at least 3 phases are needed to cancel one harmonic"));
        }
        if s.phase_points < 5 {
            return Err(Error::invalid("scan.phase_points", "at least 5 phase samples are required"));
        }
        if s.phase_periods < 1 {
            return Err(Error::invalid("scan.phase_periods", "must be >= 1"));
        }
        self.ker_edges()?;
        if !(s.vibration_depth >= 0.0 && s.vibration_depth < 1.0) {
            return Err(Error::invalid("scan.vibration_depth", "must be in [0, 1)"));
        }
        if s.vibration_depth > 0.0 {
            positive("scan.vibration_wavenumber", s.vibration_wavenumber)?;
        }
        self.event_model()?.validate()?;
        for (name, v) in [("events.shots_per_delay", self.events.shots_per_delay), ("events.shots_per_phase", self.events.shots_per_phase)] {
            if v < 2 {
                return Err(Error::invalid(name, "at least 2 shots per scan point are required"));
            }
        }
        if !(self.covariance.gate_epsilon_au >= 0.0) {
            return Err(Error::invalid("covariance.gate_epsilon_au", "must be non-negative"));
        }
        let a = &self.analysis;
        positive("analysis.min_periods", a.min_periods)?;
        positive("analysis.significance", a.significance)?;
        if !(0.0..1.0).contains(&a.min_relative_amplitude) {
            return Err(Error::invalid("analysis.min_relative_amplitude", "must be in [0, 1)"));
        }
        if a.max_harmonic < 1 {
            return Err(Error::invalid("analysis.max_harmonic", "must be >= 1"));
        }
        if !(0.0 <= a.hockey_trail_to && a.hockey_trail_to < a.hockey_lead_from && a.hockey_lead_from < a.hockey_lead_to && a.hockey_lead_to <= 1.0) {
            return Err(Error::invalid("analysis.hockey_*", "need 0 <= trail_to < lead_from < lead_to <= 1"));
        }
        positive("analysis.phase_agreement_rad", a.phase_agreement_rad)?;
        let e = &self.ensemble;
        if e.members == 0 {
            return Err(Error::invalid("ensemble.members", "must be >= 1"));
        }
        if !(0.0..1.0).contains(&e.fraction) {
            return Err(Error::invalid("ensemble.fraction", "must be in [0, 1)"));
        }
        if !(0.0..=1.0).contains(&e.min_persistence) {
            return Err(Error::invalid("ensemble.min_persistence", "must be in [0, 1]"));
        }
        if !(0.0..=p.total_time_fs).contains(&e.probe_time_fs) {
            return Err(Error::invalid("ensemble.probe_time_fs", "must lie inside the propagation"));
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<SpatialGrid> {
        SpatialGrid::new(self.grid.r_min_bohr, self.grid.r_max_bohr, self.grid.points)
    }

    /// Photon energy of the carrier in eV.
    pub fn photon_energy_ev(&self) -> f64 {
        PLANCK_EV_FS * SPEED_OF_LIGHT_NM_PER_FS / self.pulse.wavelength_nm
    }

    pub fn lower_curve(&self) -> Result<PotentialCurve> {
        let pts: Vec<(f64, f64)> = self
            .potential
            .control_points
            .iter()
            .map(|p| (angstrom_to_bohr(p[0]), ev_to_hartree(p[1])))
            .collect();
        PotentialCurve::from_control_points(&pts).map_err(|e| match e {
            Error::InvalidParameter { reason, .. } => Error::invalid("potential.control_points", reason),
            other => other,
        })
    }

    /// The configured surfaces, with the configured perturbation applied.
    pub fn potential_pair(&self) -> Result<PotentialPair> {
        let pot = &self.potential;
        positive("potential.upper_scale", pot.upper_scale)?;
        let offset = ev_to_hartree(pot.offset_ev.unwrap_or_else(|| self.photon_energy_ev()));
        if !offset.is_finite() {
            return Err(Error::invalid("potential.offset_ev", "must be finite"));
        }
        let pair = PotentialPair::scaled(self.lower_curve()?, pot.upper_scale, offset)?;
        if !(0.0..1.0).contains(&pot.perturb_fraction) {
            return Err(Error::invalid("potential.perturb_fraction", "must be in [0, 1)"));
        }
        pair.perturbed(pot.perturb_seed, pot.perturb_fraction)
    }

    pub fn mass_au(&self) -> f64 {
        let m = self.wavepacket.mass_u.unwrap_or(69.0 * 43.0 / 112.0);
        crate::units::dalton_to_au(m)
    }

    pub fn initial_packet(&self) -> Result<Wavefunction> {
        let w = &self.wavepacket;
        if let Some(m) = w.mass_u {
            positive("wavepacket.mass_u", m)?;
        }
        let grid = self.grid()?;
        let r0 = angstrom_to_bohr(w.r0_angstrom);
        if !grid.contains(r0) {
            return Err(Error::invalid("wavepacket.r0_angstrom", "launch point is outside the grid"));
        }
        positive("wavepacket.sigma_angstrom", w.sigma_angstrom)?;
        Wavefunction::gaussian(grid, r0, angstrom_to_bohr(w.sigma_angstrom), w.p0_au, self.mass_au())
    }

    pub fn wavepacket(&self) -> Result<TwoStateWavepacket> {
        self.wavepacket_on(self.potential_pair()?)
    }

    pub fn wavepacket_on(&self, pair: PotentialPair) -> Result<TwoStateWavepacket> {
        let sys = &self.system;
        TwoStateWavepacket::franck_condon(self.initial_packet()?, complex(sys.a1), complex(sys.a2), pair)
    }

    pub fn propagation_params(&self) -> Result<PropagationParams> {
        let p = &self.propagation;
        let grid = self.grid()?;
        let start = grid.r_max() - p.absorber_fraction * (grid.r_max() - grid.r_min());
        PropagationParams::new(&grid, p.dt_au, fs_to_au(p.total_time_fs), fs_to_au(p.snapshot_interval_fs), p.absorber_strength, start)
    }

    pub fn pulse(&self) -> Result<PulseSpec> {
        let p = &self.pulse;
        PulseSpec::from_wavelength(p.wavelength_nm, p.fwhm_fs, p.amplitude, p.samples, p.dt_fs)
    }

    pub fn mask(&self) -> Result<ShaperMask> {
        let m = &self.mask;
        let nu = m.nu_l_phz.unwrap_or(SPEED_OF_LIGHT_NM_PER_FS / self.pulse.wavelength_nm);
        ShaperMask::new(m.a_tot, m.a_r, m.tau_fs, m.phi_l_rad, nu)
    }

    pub fn system(&self) -> Result<TwoStateSystem> {
        let s = &self.system;
        TwoStateSystem::new(
            complex(s.a1),
            complex(s.a2),
            complex(s.q1f),
            complex(s.q2f),
            s.pump_order,
            s.probe_order,
            s.photon_separation,
        )
    }

    /// Peak probe field `E'0 = A_tot A_R E0`.
    pub fn probe_field(&self) -> f64 {
        self.mask.a_tot * self.mask.a_r * self.pulse.amplitude
    }

    pub fn delays(&self) -> Result<Vec<f64>> {
        let s = &self.scan;
        inclusive_range("scan.delay_step_fs", s.delay_start_fs, s.delay_stop_fs, s.delay_step_fs)
    }

    /// Phase-scan samples, uniformly covering `phase_periods` × 2π.
    pub fn phases(&self) -> Vec<f64> {
        let s = &self.scan;
        let span = 2.0 * std::f64::consts::PI * s.phase_periods as f64;
        (0..s.phase_points).map(|k| span * k as f64 / s.phase_points as f64).collect()
    }

    /// Phases averaged at every delay of a delay scan.
    pub fn averaging_phases(&self) -> Vec<f64> {
        let n = self.scan.phases_per_delay;
        (0..n).map(|k| 2.0 * std::f64::consts::PI * k as f64 / n as f64).collect()
    }

    pub fn ker_edges(&self) -> Result<Vec<f64>> {
        let s = &self.scan;
        positive("scan.ker_min_ev", s.ker_min_ev)?;
        if !(s.ker_max_ev > s.ker_min_ev) || s.ker_bins == 0 {
            return Err(Error::invalid("scan.ker_max_ev", "need ker_max_ev > ker_min_ev and ker_bins >= 1"));
        }
        let w = (s.ker_max_ev - s.ker_min_ev) / s.ker_bins as f64;
        Ok((0..=s.ker_bins).map(|k| s.ker_min_ev + w * k as f64).collect())
    }

    /// Vibrational period imprinted on delay scans, if any.
    pub fn vibration_period_fs(&self) -> Option<f64> {
        (self.scan.vibration_depth > 0.0).then(|| wavenumber_to_period_fs(self.scan.vibration_wavenumber))
    }

    pub fn species_table(&self) -> Result<SpeciesTable> {
        SpeciesTable::new(
            self.species
                .iter()
                .map(|s| Species {
                    id: s.id,
                    name: s.name.clone(),
                    mass_u: s.mass_u,
                    charge: s.charge,
                })
                .collect(),
        )
    }

    pub fn calibration(&self) -> Result<DetectorCalibration> {
        let d = &self.detector;
        let table = self.species_table()?;
        let t0 = self
            .species
            .iter()
            .map(|s| (s.id, s.t0_ns.unwrap_or(d.tof_scale_ns * (s.mass_u / s.charge).sqrt())))
            .collect();
        DetectorCalibration::new(d.cx_mm_per_au, d.cy_mm_per_au, d.ct_ns_per_au, t0).and_then(|c| {
            table.iter().try_for_each(|s| c.t0(s.id).map(|_| ()))?;
            Ok(c)
        })
    }

    pub fn event_model(&self) -> Result<EventModel> {
        let e = &self.events;
        let blur = (e.blur_xy_mm > 0.0 || e.blur_t_ns > 0.0).then_some(DetectorBlur {
            sigma_xy_mm: e.blur_xy_mm,
            sigma_t_ns: e.blur_t_ns,
        });
        Ok(EventModel {
            species: self.species_table()?,
            calibration: self.calibration()?,
            fragment_a: e.fragment_a,
            fragment_b: e.fragment_b,
            pair_probability: e.pair_probability,
            background_rates: e.background.iter().map(|b| (b.species, b.rate)).collect(),
            temperature_k: e.temperature_k,
            blur,
        })
    }

    pub fn covariance_settings(&self, species: &SpeciesTable, axis: ScanAxis) -> Result<CovarianceSettings> {
        let eps = (self.covariance.gate_epsilon_au > 0.0).then_some(self.covariance.gate_epsilon_au);
        CovarianceSettings::new(species, self.events.fragment_a, self.events.fragment_b, self.ker_edges()?, eps, axis)
    }

    pub fn fit_settings(&self) -> FitSettings {
        FitSettings {
            significance: self.analysis.significance,
            min_relative_amplitude: self.analysis.min_relative_amplitude,
        }
    }

    pub fn hockey_settings(&self) -> HockeySettings {
        let a = &self.analysis;
        HockeySettings {
            lead_from: a.hockey_lead_from,
            lead_to: a.hockey_lead_to,
            trail_to: a.hockey_trail_to,
            min_r_squared: a.hockey_min_r_squared,
            min_departure: a.hockey_min_departure_rad,
        }
    }
}
