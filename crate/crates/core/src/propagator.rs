//! Symmetric split-operator propagation of nuclear wave packets.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::grid::SpatialGrid;
use crate::potential::PotentialPair;
use crate::units::au_to_fs;
use crate::wavefunction::Wavefunction;
use crate::{Error, Result};

/// Edge density above which an unabsorbed packet is considered to have hit
/// the periodic boundary.
pub const EDGE_DENSITY_THRESHOLD: f64 = 1e-6;
/// Fraction of the grid on each side inspected by the edge check.
pub const EDGE_FRACTION: f64 = 0.025;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Absorber {
    /// Absorption rate per atomic time unit at full ramp.
    pub strength: f64,
    /// Start of the cos² ramp (bohr); the ramp ends at the grid edge.
    pub start_r: f64,
}

impl Absorber {
    /// Per-step amplitude mask `cos²(π s / 2)^(strength·dt)`, where `s` runs
    /// from 0 at `start_r` to 1 at the grid end.
    pub fn mask(&self, grid: &SpatialGrid, dt: f64) -> Vec<f64> {
        let width = grid.r_max() - self.start_r;
        grid.points()
            .into_iter()
            .map(|r| {
                if r < self.start_r {
                    1.0
                } else {
                    let s = ((r - self.start_r) / width).min(1.0);
                    (0.5 * PI * s).cos().powi(2).powf(self.strength * dt)
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PropagationParams {
    /// Time step (atomic units). Always divides `snapshot_interval` exactly.
    pub dt: f64,
    pub total_time: f64,
    pub snapshot_interval: f64,
    pub absorber: Option<Absorber>,
}

impl PropagationParams {
    /// Build parameters in atomic units. The requested step is shortened so
    /// that a whole number of steps fits in one snapshot interval. A zero
    /// absorber strength disables the absorber.
    pub fn new(
        grid: &SpatialGrid,
        dt: f64,
        total_time: f64,
        snapshot_interval: f64,
        absorber_strength: f64,
        absorber_start_r: f64,
    ) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::invalid("propagation.dt_au", format!("{dt} must be positive")));
        }
        if !(total_time >= 0.0) || !total_time.is_finite() {
            return Err(Error::invalid("propagation.total_time_fs", "must be non-negative"));
        }
        if !(snapshot_interval > 0.0) || !snapshot_interval.is_finite() {
            return Err(Error::invalid("propagation.snapshot_interval_fs", "must be positive"));
        }
        if !(absorber_strength >= 0.0) || !absorber_strength.is_finite() {
            return Err(Error::invalid("propagation.absorber_strength", "must be non-negative"));
        }
        let per_snapshot = (snapshot_interval / dt - 1e-9).ceil().max(1.0);
        let dt = snapshot_interval / per_snapshot;
        let absorber = if absorber_strength > 0.0 {
            if !(absorber_start_r > grid.r_min() && absorber_start_r < grid.r_max()) {
                return Err(Error::invalid(
                    "propagation.absorber_fraction",
                    format!("absorber start {absorber_start_r} bohr is not inside the grid"),
                ));
            }
            Some(Absorber {
                strength: absorber_strength,
                start_r: absorber_start_r,
            })
        } else {
            None
        };
        Ok(PropagationParams {
            dt,
            total_time,
            snapshot_interval,
            absorber,
        })
    }

    pub fn steps_per_snapshot(&self) -> usize {
        (self.snapshot_interval / self.dt).round() as usize
    }

    /// Number of recorded snapshots after the initial one.
    pub fn snapshot_count(&self) -> usize {
        (self.total_time / self.snapshot_interval - 1e-9).ceil().max(0.0) as usize
    }
}

/// Precomputed phase factors and FFT plans for one potential.
pub struct SplitOperator {
    half_v: Vec<Complex64>,
    full_v: Vec<Complex64>,
    kinetic: Vec<Complex64>,
    mask: Option<Vec<f64>>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    scratch: Vec<Complex64>,
}

impl SplitOperator {
    pub fn new(grid: &SpatialGrid, mass: f64, potential: &[f64], dt: f64, absorber: Option<&Absorber>) -> Result<Self> {
        if potential.len() != grid.len() {
            return Err(Error::GridMismatch);
        }
        if !(mass > 0.0) {
            return Err(Error::invalid("mass", "must be positive"));
        }
        let n = grid.len();
        let scale = 1.0 / n as f64;
        let half_v = potential.iter().map(|v| Complex64::from_polar(1.0, -0.5 * v * dt)).collect();
        let full_v = potential.iter().map(|v| Complex64::from_polar(1.0, -v * dt)).collect();
        let kinetic = grid
            .momenta()
            .into_iter()
            .map(|k| Complex64::from_polar(scale, -0.5 * k * k / mass * dt))
            .collect();
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(n);
        let inverse = planner.plan_fft_inverse(n);
        let scratch_len = forward.get_inplace_scratch_len().max(inverse.get_inplace_scratch_len());
        Ok(SplitOperator {
            half_v,
            full_v,
            kinetic,
            mask: absorber.map(|a| a.mask(grid, dt)),
            forward,
            inverse,
            scratch: vec![Complex64::default(); scratch_len],
        })
    }

    fn kinetic_step(&mut self, psi: &mut [Complex64]) {
        self.forward.process_with_scratch(psi, &mut self.scratch);
        psi.iter_mut().zip(&self.kinetic).for_each(|(c, k)| *c *= k);
        self.inverse.process_with_scratch(psi, &mut self.scratch);
    }

    fn apply_mask(&self, psi: &mut [Complex64]) {
        if let Some(mask) = &self.mask {
            psi.iter_mut().zip(mask).for_each(|(c, m)| *c *= m);
        }
    }

    /// `steps` Strang steps. Adjacent half potential steps are fused; the
    /// absorber mask is diagonal in R and commutes with them.
    pub fn run(&mut self, psi: &mut [Complex64], steps: usize) {
        if steps == 0 {
            return;
        }
        psi.iter_mut().zip(&self.half_v).for_each(|(c, v)| *c *= v);
        for s in 0..steps {
            self.kinetic_step(psi);
            let v = if s + 1 == steps { &self.half_v } else { &self.full_v };
            psi.iter_mut().zip(v).for_each(|(c, v)| *c *= v);
            self.apply_mask(psi);
        }
    }
}

/// One symmetric step: half potential phase, full kinetic phase in momentum
/// space, half potential phase.
pub fn split_operator_step(chi: &Wavefunction, potential: &[f64], dt: f64, absorber: Option<&Absorber>) -> Result<Wavefunction> {
    let mut op = SplitOperator::new(chi.grid(), chi.mass(), potential, dt, absorber)?;
    let mut out = chi.clone();
    op.run(out.values_mut(), 1);
    Ok(out)
}

fn edge_density(grid: &SpatialGrid, psi: &[Complex64]) -> f64 {
    let n = psi.len();
    let w = ((n as f64 * EDGE_FRACTION).ceil() as usize).max(1);
    let s: f64 = psi[..w].iter().chain(&psi[n - w..]).map(|c| c.norm_sqr()).sum();
    s * grid.dr()
}

/// Propagate one packet, returning the initial state and every snapshot.
pub fn propagate(chi: &Wavefunction, potential: &[f64], params: &PropagationParams) -> Result<Vec<Vec<Complex64>>> {
    let grid = *chi.grid();
    let mut op = SplitOperator::new(&grid, chi.mass(), potential, params.dt, params.absorber.as_ref())?;
    let mut psi = chi.values().to_vec();
    let per = params.steps_per_snapshot();
    let count = params.snapshot_count();
    let mut out = Vec::with_capacity(count + 1);
    out.push(psi.clone());
    for k in 1..=count {
        op.run(&mut psi, per);
        if params.absorber.is_none() {
            let edge = edge_density(&grid, &psi);
            if edge > EDGE_DENSITY_THRESHOLD {
                return Err(Error::GridEdgeReached {
                    time_fs: au_to_fs(k as f64 * params.snapshot_interval),
                    density: edge,
                });
            }
        }
        out.push(psi.clone());
    }
    Ok(out)
}

/// Two nuclear packets with their electronic amplitudes and surfaces.
#[derive(Debug, Clone)]
pub struct TwoStateWavepacket {
    pub chi1: Wavefunction,
    pub chi2: Wavefunction,
    pub a1: Complex64,
    pub a2: Complex64,
    pub potentials: PotentialPair,
}

impl TwoStateWavepacket {
    pub fn new(chi1: Wavefunction, chi2: Wavefunction, a1: Complex64, a2: Complex64, potentials: PotentialPair) -> Result<Self> {
        if chi1.grid() != chi2.grid() || chi1.mass() != chi2.mass() {
            return Err(Error::GridMismatch);
        }
        let pop = a1.norm_sqr() + a2.norm_sqr();
        if !pop.is_finite() || pop > 1.0 + 1e-12 {
            return Err(Error::invalid("system.a1/a2", format!("|a1|^2 + |a2|^2 = {pop} exceeds 1")));
        }
        Ok(TwoStateWavepacket {
            chi1,
            chi2,
            a1,
            a2,
            potentials,
        })
    }

    /// Both states launched from the same packet (vertical excitation).
    pub fn franck_condon(chi: Wavefunction, a1: Complex64, a2: Complex64, potentials: PotentialPair) -> Result<Self> {
        Self::new(chi.clone(), chi, a1, a2, potentials)
    }

    pub fn grid(&self) -> &SpatialGrid {
        self.chi1.grid()
    }

    /// `V1` and `V2 + offset` sampled on the grid.
    pub fn sampled_potentials(&self) -> (Vec<f64>, Vec<f64>) {
        let r = self.grid().points();
        (
            r.iter().map(|&x| self.potentials.v1(x)).collect(),
            r.iter().map(|&x| self.potentials.v2(x)).collect(),
        )
    }
}

/// Snapshots of both packets at a fixed interval.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub grid: SpatialGrid,
    pub mass: f64,
    pub a1: Complex64,
    pub a2: Complex64,
    /// Snapshot times in atomic units, starting at zero.
    pub times: Vec<f64>,
    pub chi1: Vec<Vec<Complex64>>,
    pub chi2: Vec<Vec<Complex64>>,
    pub v1: Vec<f64>,
    pub v2: Vec<f64>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn times_fs(&self) -> Vec<f64> {
        self.times.iter().map(|&t| au_to_fs(t)).collect()
    }

    /// Snapshot index recorded at `t_fs` (to within 1e-6 fs).
    pub fn index_at(&self, t_fs: f64) -> Result<usize> {
        let times = self.times_fs();
        let out_of_range = || Error::TimeOutOfRange {
            time_fs: t_fs,
            start_fs: times[0],
            end_fs: *times.last().unwrap(),
        };
        let i = times
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - t_fs).abs().total_cmp(&(b.1 - t_fs).abs()))
            .map(|(i, _)| i)
            .ok_or_else(out_of_range)?;
        if (times[i] - t_fs).abs() > 1e-6 {
            return Err(out_of_range());
        }
        Ok(i)
    }

    pub fn snapshot(&self, i: usize) -> (Wavefunction, Wavefunction) {
        (
            Wavefunction::from_values(self.grid, self.mass, self.chi1[i].clone()).expect("consistent snapshot"),
            Wavefunction::from_values(self.grid, self.mass, self.chi2[i].clone()).expect("consistent snapshot"),
        )
    }

    pub fn snapshot_at(&self, t_fs: f64) -> Result<(Wavefunction, Wavefunction)> {
        Ok(self.snapshot(self.index_at(t_fs)?))
    }
}

/// Evolve both packets independently on their own surfaces.
pub fn propagate_pair(wp: &TwoStateWavepacket, params: &PropagationParams) -> Result<Trajectory> {
    let (v1, v2) = wp.sampled_potentials();
    let (s1, s2) = rayon::join(|| propagate(&wp.chi1, &v1, params), || propagate(&wp.chi2, &v2, params));
    let (chi1, chi2) = (s1?, s2?);
    let times = (0..chi1.len()).map(|k| k as f64 * params.snapshot_interval).collect();
    Ok(Trajectory {
        grid: *wp.grid(),
        mass: wp.chi1.mass(),
        a1: wp.a1,
        a2: wp.a2,
        times,
        chi1,
        chi2,
        v1,
        v2,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::PotentialCurve;
    use crate::wavefunction::{overlap, phase_difference};

    fn params(grid: &SpatialGrid, dt: f64, total: f64, snap: f64) -> PropagationParams {
        PropagationParams::new(grid, dt, total, snap, 0.0, 0.0).unwrap()
    }

    #[test]
    fn dt_is_snapped_to_snapshot_interval() {
        let g = SpatialGrid::new(0.0, 10.0, 64).unwrap();
        let p = PropagationParams::new(&g, 0.3, 10.0, 1.0, 0.0, 0.0).unwrap();
        assert_eq!(p.steps_per_snapshot(), 4);
        assert!((p.dt - 0.25).abs() < 1e-15);
        assert_eq!(p.snapshot_count(), 10);
        assert!(PropagationParams::new(&g, -1.0, 10.0, 1.0, 0.0, 0.0).is_err());
        assert!(PropagationParams::new(&g, 0.1, 10.0, 1.0, 0.1, 20.0).is_err());
    }

    #[test]
    fn free_gaussian_spreads_analytically() {
        let g = SpatialGrid::new(-40.0, 40.0, 1024).unwrap();
        let (mass, sigma0, dt) = (1.0, 1.0, 0.005);
        let chi = Wavefunction::gaussian(g, 0.0, sigma0, 0.0, mass).unwrap();
        let mut op = SplitOperator::new(&g, mass, &vec![0.0; g.len()], dt, None).unwrap();
        let mut out = chi.clone();
        op.run(out.values_mut(), 1000);
        let t = 1000.0 * dt;
        let expect = sigma0 * sigma0 + (t / (2.0 * mass * sigma0)).powi(2);
        let got = out.position_variance();
        assert!((got / expect - 1.0).abs() < 1e-6, "{got} vs {expect}");
    }

    #[test]
    fn coherent_state_returns_after_one_period() {
        let g = SpatialGrid::new(-10.0, 10.0, 512).unwrap();
        let (mass, k) = (1000.0f64, 1.0f64);
        let omega = (k / mass).sqrt();
        let period = 2.0 * PI / omega;
        let sigma = (1.0 / (2.0 * mass * omega)).sqrt();
        let v: Vec<f64> = g.points().iter().map(|r| 0.5 * k * r * r).collect();
        let chi = Wavefunction::gaussian(g, 1.0, sigma, 0.0, mass).unwrap();
        let steps = 2000;
        let mut op = SplitOperator::new(&g, mass, &v, period / steps as f64, None).unwrap();
        let mut out = chi.clone();
        op.run(out.values_mut(), steps / 2);
        assert!((out.mean_position() + 1.0).abs() < 1e-3);
        op.run(out.values_mut(), steps / 2);
        assert!((out.mean_position() - 1.0).abs() < 1e-4, "{}", out.mean_position());
    }

    #[test]
    fn norm_is_conserved_without_absorber() {
        let g = SpatialGrid::new(1.0, 60.0, 2048).unwrap();
        let curve = PotentialCurve::from_control_points(&[(2.4, 0.0), (3.0, -0.03), (3.8, -0.02), (4.6, -0.09)]).unwrap();
        let v = curve.sample(&g);
        let chi = Wavefunction::gaussian(g, 2.5, 0.2, 0.0, 30000.0).unwrap();
        let mut op = SplitOperator::new(&g, 30000.0, &v, 0.5, None).unwrap();
        let mut out = chi.clone();
        op.run(out.values_mut(), 1000);
        assert!((out.norm_squared() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn second_order_in_dt() {
        let g = SpatialGrid::new(-10.0, 10.0, 256).unwrap();
        let v: Vec<f64> = g.points().iter().map(|r| 0.05 * r * r + 0.002 * r.powi(4)).collect();
        let chi = Wavefunction::gaussian(g, 0.5, 0.7, 0.3, 2.0).unwrap();
        let run = |dt: f64, steps: usize| {
            let mut op = SplitOperator::new(&g, 2.0, &v, dt, None).unwrap();
            let mut out = chi.values().to_vec();
            op.run(&mut out, steps);
            out
        };
        let a = run(0.2, 50);
        let b = run(0.1, 100);
        let c = run(0.05, 200);
        let diff = |x: &[Complex64], y: &[Complex64]| x.iter().zip(y).map(|(p, q)| (p - q).norm()).fold(0.0, f64::max);
        let d1 = diff(&a, &b);
        let d2 = diff(&b, &c);
        assert!(d2 * 3.0 < d1, "{d1} {d2}");
    }

    #[test]
    fn ehrenfest_theorem() {
        let g = SpatialGrid::new(-12.0, 12.0, 512).unwrap();
        let mass = 500.0;
        let pot = |r: f64| 0.02 * r * r + 0.004 * r.powi(4);
        let dpot = |r: f64| 0.04 * r + 0.016 * r.powi(3);
        let v: Vec<f64> = g.points().iter().map(|&r| pot(r)).collect();
        let chi = Wavefunction::gaussian(g, 1.5, 0.15, 0.0, mass).unwrap();
        let dt = 0.5;
        let mut op = SplitOperator::new(&g, mass, &v, dt, None).unwrap();
        let mut psi = chi.clone();
        let mut p = vec![psi.mean_momentum()];
        let mut f = vec![-psi.expectation(dpot)];
        let per = 20;
        for _ in 0..200 {
            op.run(psi.values_mut(), per);
            p.push(psi.mean_momentum());
            f.push(-psi.expectation(dpot));
        }
        let h = per as f64 * dt;
        let fmax = f.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        for i in 1..p.len() - 1 {
            let dp = (p[i + 1] - p[i - 1]) / (2.0 * h);
            assert!((dp - f[i]).abs() < 0.01 * fmax, "step {i}: {dp} vs {}", f[i]);
        }
    }

    fn pair(offset: f64, scale: f64) -> PotentialPair {
        let c = PotentialCurve::from_control_points(&[(2.4, 0.0), (3.0, -0.033), (3.8, -0.022), (4.6, -0.092)]).unwrap();
        PotentialPair::scaled(c, scale, offset).unwrap()
    }

    fn launch(p: PotentialPair) -> TwoStateWavepacket {
        let g = SpatialGrid::new(1.0, 60.0, 2048).unwrap();
        let chi = Wavefunction::gaussian(g, 2.5, 0.1, 0.0, 48700.0).unwrap();
        let a = Complex64::new(0.5f64.sqrt(), 0.0);
        TwoStateWavepacket::franck_condon(chi, a, a, p).unwrap()
    }

    #[test]
    fn identical_surfaces_give_identical_packets() {
        let wp = launch(pair(0.0, 1.0));
        let g = *wp.grid();
        let tr = propagate_pair(&wp, &PropagationParams::new(&g, 0.5, 400.0, 100.0, 0.01, 55.0).unwrap()).unwrap();
        for (a, b) in tr.chi1.iter().zip(&tr.chi2) {
            assert!(a.iter().zip(b).all(|(x, y)| (x - y).norm() < 1e-10));
        }
    }

    #[test]
    fn constant_offset_is_a_global_phase() {
        let dv = 0.057;
        let wp = launch(pair(dv, 1.0));
        let g = *wp.grid();
        let tr = propagate_pair(&wp, &PropagationParams::new(&g, 0.5, 800.0, 200.0, 0.01, 55.0).unwrap()).unwrap();
        for i in 0..tr.len() {
            let (c1, c2) = tr.snapshot(i);
            assert!(c1.values().iter().zip(c2.values()).all(|(a, b)| (a.norm() - b.norm()).abs() < 1e-10));
            let pd = phase_difference(&c1, &c2, 1e-4).unwrap();
            let expect = crate::wavefunction::wrap_phase(-dv * tr.times[i]);
            for p in &pd.phase {
                assert!(crate::wavefunction::wrap_phase(p - expect).abs() < 1e-8);
            }
            assert!((overlap(&c1, &c2).unwrap().norm() - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn edge_hit_without_absorber_is_an_error() {
        let g = SpatialGrid::new(-10.0, 10.0, 256).unwrap();
        let chi = Wavefunction::gaussian(g, 5.0, 0.5, 5.0, 1.0).unwrap();
        let p = params(&g, 0.05, 5.0, 0.5);
        let err = propagate(&chi, &vec![0.0; 256], &p).unwrap_err();
        assert!(matches!(err, Error::GridEdgeReached { .. }), "{err}");
    }

    #[test]
    fn absorber_removes_outgoing_flux() {
        let g = SpatialGrid::new(-10.0, 10.0, 256).unwrap();
        let chi = Wavefunction::gaussian(g, 0.0, 0.5, 5.0, 1.0).unwrap();
        let p = PropagationParams::new(&g, 0.05, 8.0, 0.5, 5.0, 7.0).unwrap();
        let snaps = propagate(&chi, &vec![0.0; 256], &p).unwrap();
        let last = Wavefunction::from_values(g, 1.0, snaps.last().unwrap().clone()).unwrap();
        assert!(last.norm_squared() < 1e-3);
    }

    #[test]
    fn trajectory_time_lookup() {
        let wp = launch(pair(0.0, 1.04));
        let g = *wp.grid();
        let p = PropagationParams::new(&g, 0.5, crate::units::fs_to_au(4.0), crate::units::fs_to_au(1.0), 0.01, 55.0).unwrap();
        let tr = propagate_pair(&wp, &p).unwrap();
        assert_eq!(tr.len(), 5);
        assert_eq!(tr.index_at(3.0).unwrap(), 3);
        assert!(matches!(tr.index_at(3.5), Err(Error::TimeOutOfRange { .. })));
        assert!(tr.index_at(9.0).is_err());
    }
}
