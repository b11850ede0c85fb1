//! Electronic coherence between the two propagated states and the
//! phase- and delay-dependent dication yield.
//!
//! The propagator evolves the full nuclear states `Φᵢ(R,t)`, which already
//! carry the dynamical phase `exp(-i Vᵢ(R) t)`. The nuclear envelopes are
//! therefore `χᵢ = Φᵢ exp(i ωᵢ(R) t)` with `ωᵢ = Vᵢ`, and
//! `ρ₁₂ = a1 χ1 conj(a2 χ2) exp(i (ω2 - ω1) t)` reduces to
//! `a1 conj(a2) Φ1 conj(Φ2)`.

use num_complex::Complex64;

use crate::propagator::Trajectory;
use crate::units::hartree_to_ev;
use crate::wavefunction::overlap;
use crate::{Error, Result};

/// Tolerance below zero accepted before a yield is reported as negative.
pub const NEGATIVE_YIELD_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoStateSystem {
    pub a1: Complex64,
    pub a2: Complex64,
    pub q1f: Complex64,
    pub q2f: Complex64,
    /// Pump photon order to state 1.
    pub pump_order: u32,
    /// Probe photon order from state 1 to the dication.
    pub probe_order: u32,
    /// Number of photons separating the two states.
    pub photon_separation: u32,
}

impl TwoStateSystem {
    pub fn new(
        a1: Complex64,
        a2: Complex64,
        q1f: Complex64,
        q2f: Complex64,
        pump_order: u32,
        probe_order: u32,
        photon_separation: u32,
    ) -> Result<Self> {
        if pump_order < 1 {
            return Err(Error::invalid("system.pump_order", "must be >= 1"));
        }
        if probe_order < 2 {
            return Err(Error::invalid("system.probe_order", "double ionization needs >= 2"));
        }
        if photon_separation < 1 || photon_separation > probe_order {
            return Err(Error::invalid("system.photon_separation", format!("must be in 1..={probe_order}")));
        }
        for (name, v) in [("system.a1", a1), ("system.a2", a2), ("system.q1f", q1f), ("system.q2f", q2f)] {
            if !v.re.is_finite() || !v.im.is_finite() {
                return Err(Error::invalid(name, "must be finite"));
            }
        }
        if a1.norm_sqr() + a2.norm_sqr() > 1.0 + 1e-12 {
            return Err(Error::invalid("system.a1/a2", "|a1|^2 + |a2|^2 exceeds 1"));
        }
        Ok(TwoStateSystem {
            a1,
            a2,
            q1f,
            q2f,
            pump_order,
            probe_order,
            photon_separation,
        })
    }
}

/// `b1 = Q1f E^m`, `b2 = Q2f E^(m-K)`.
pub fn ionization_amplitudes(sys: &TwoStateSystem, e_probe: f64) -> Result<(Complex64, Complex64)> {
    if !(e_probe >= 0.0) || !e_probe.is_finite() {
        return Err(Error::invalid("probe field", format!("{e_probe} must be non-negative")));
    }
    let m = sys.probe_order as i32;
    let k = sys.photon_separation as i32;
    Ok((sys.q1f * e_probe.powi(m), sys.q2f * e_probe.powi(m - k)))
}

/// `ρ₁₂(R, t)` on the trajectory grid at snapshot time `t_fs`.
pub fn coherence_density(traj: &Trajectory, t_fs: f64) -> Result<Vec<Complex64>> {
    let i = traj.index_at(t_fs)?;
    Ok(coherence_at_index(traj, i))
}

pub(crate) fn coherence_at_index(traj: &Trajectory, i: usize) -> Vec<Complex64> {
    let c = traj.a1 * traj.a2.conj();
    traj.chi1[i].iter().zip(&traj.chi2[i]).map(|(p1, p2)| c * p1 * p2.conj()).collect()
}

/// R-resolved dication yield and its R integral.
#[derive(Debug, Clone, PartialEq)]
pub struct YieldProfile {
    pub r: Vec<f64>,
    pub y: Vec<f64>,
    pub dr: f64,
}

impl YieldProfile {
    pub fn total(&self) -> f64 {
        self.y.iter().sum::<f64>() * self.dr
    }

    /// Yield histogrammed in Coulomb kinetic energy `E = 1/R`, with bin
    /// edges in eV.
    pub fn energy_histogram(&self, edges_ev: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; edges_ev.len().saturating_sub(1)];
        for (r, y) in self.r.iter().zip(&self.y) {
            if *r <= 0.0 {
                continue;
            }
            let e = hartree_to_ev(1.0 / r);
            let k = edges_ev.partition_point(|&x| x <= e);
            if k >= 1 && k < edges_ev.len() {
                out[k - 1] += y * self.dr;
            }
        }
        out
    }
}

/// `Y(R) = |a1 b1|² |Φ1|² + |a2 b2|² |Φ2|² + 2 Re[a1 conj(a2) b1 conj(b2) e^{iKφ} ρ₁₂(R)]`
/// at the snapshot nearest the probe delay.
///
/// The incoherent terms are weighted by the R-resolved densities so that
/// the R integral reproduces the scalar yield for normalised packets.
pub fn dication_yield(sys: &TwoStateSystem, traj: &Trajectory, tau_fs: f64, phi: f64, e_probe: f64) -> Result<YieldProfile> {
    let i = traj.index_at(tau_fs)?;
    dication_yield_at_index(sys, traj, i, phi, e_probe)
}

pub fn dication_yield_at_index(sys: &TwoStateSystem, traj: &Trajectory, i: usize, phi: f64, e_probe: f64) -> Result<YieldProfile> {
    let (b1, b2) = ionization_amplitudes(sys, e_probe)?;
    let w1 = (sys.a1 * b1).norm_sqr();
    let w2 = (sys.a2 * b2).norm_sqr();
    let k = sys.photon_separation as f64;
    let c = sys.a1 * sys.a2.conj() * b1 * b2.conj() * Complex64::from_polar(1.0, k * phi);
    let (p1, p2) = (&traj.chi1[i], &traj.chi2[i]);
    let mut y = Vec::with_capacity(p1.len());
    for j in 0..p1.len() {
        let v = w1 * p1[j].norm_sqr() + w2 * p2[j].norm_sqr() + 2.0 * (c * p1[j] * p2[j].conj()).re;
        if v < -NEGATIVE_YIELD_TOLERANCE {
            return Err(Error::NegativeYield { r: traj.grid.r(j), value: v });
        }
        y.push(v);
    }
    Ok(YieldProfile {
        r: traj.grid.points(),
        y,
        dr: traj.grid.dr(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecoherenceSample {
    pub time_fs: f64,
    /// `|∫ χ1* χ2 dR|`.
    pub overlap: f64,
    /// `|∫ ρ₁₂ dR| / ∫ |ρ₁₂| dR`; `None` when the denominator vanishes.
    pub contrast: Option<f64>,
    pub population1: f64,
    pub population2: f64,
}

pub fn decoherence_decomposition(traj: &Trajectory) -> Result<Vec<DecoherenceSample>> {
    let times = traj.times_fs();
    let dr = traj.grid.dr();
    (0..traj.len())
        .map(|i| {
            let (c1, c2) = traj.snapshot(i);
            let ov = overlap(&c1, &c2)?.norm();
            let rho = coherence_at_index(traj, i);
            let integrated: Complex64 = rho.iter().sum::<Complex64>() * dr;
            let resolved: f64 = rho.iter().map(|c| c.norm()).sum::<f64>() * dr;
            let contrast = if resolved > 1e-300 { Some(integrated.norm() / resolved) } else { None };
            Ok(DecoherenceSample {
                time_fs: times[i],
                overlap: ov,
                contrast,
                population1: traj.a1.norm_sqr(),
                population2: traj.a2.norm_sqr(),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::SpatialGrid;
    use crate::potential::{PotentialCurve, PotentialPair};
    use crate::propagator::{propagate_pair, PropagationParams, TwoStateWavepacket};
    use crate::units::fs_to_au;
    use crate::wavefunction::Wavefunction;
    use std::f64::consts::PI;

    fn trajectory(a1: f64, a2: f64, scale: f64, offset: f64) -> Trajectory {
        let g = SpatialGrid::new(1.0, 30.0, 1024).unwrap();
        let c = PotentialCurve::from_control_points(&[(2.4, 0.0), (3.0, -0.033), (3.8, -0.022), (4.6, -0.092)]).unwrap();
        let pair = PotentialPair::scaled(c, scale, offset).unwrap();
        let chi = Wavefunction::gaussian(g, 2.5, 0.1, 0.0, 48700.0).unwrap();
        let wp = TwoStateWavepacket::franck_condon(chi, a1.into(), a2.into(), pair).unwrap();
        let p = PropagationParams::new(&g, 1.0, fs_to_au(40.0), fs_to_au(10.0), 0.01, 27.0).unwrap();
        propagate_pair(&wp, &p).unwrap()
    }

    fn sys(a1: f64, a2: f64, k: u32) -> TwoStateSystem {
        let one = Complex64::new(1.0, 0.0);
        TwoStateSystem::new(a1.into(), a2.into(), one, Complex64::from_polar(1.0, 0.4), 4, 4, k).unwrap()
    }

    #[test]
    fn amplitudes() {
        let s = sys(0.6, 0.8, 1);
        assert_eq!(ionization_amplitudes(&s, 0.0).unwrap(), (Complex64::default(), Complex64::default()));
        let (b1, b2) = ionization_amplitudes(&s, 0.3).unwrap();
        let (c1, c2) = ionization_amplitudes(&s, 0.6).unwrap();
        assert!((c1.norm_sqr() / b1.norm_sqr() - 2f64.powi(8)).abs() < 1e-9);
        assert!((c2.norm_sqr() / b2.norm_sqr() - 2f64.powi(6)).abs() < 1e-9);
        let unit = TwoStateSystem::new(0.5.into(), 0.5.into(), 1.0.into(), 1.0.into(), 4, 4, 1).unwrap();
        assert_eq!(ionization_amplitudes(&unit, 1.0).unwrap(), (1.0.into(), 1.0.into()));
        assert!(ionization_amplitudes(&unit, -1.0).is_err());
    }

    #[test]
    fn invalid_systems() {
        let one = Complex64::new(1.0, 0.0);
        assert!(TwoStateSystem::new(one, one, one, one, 4, 4, 1).is_err());
        assert!(TwoStateSystem::new(0.5.into(), 0.5.into(), one, one, 0, 4, 1).is_err());
        assert!(TwoStateSystem::new(0.5.into(), 0.5.into(), one, one, 4, 1, 1).is_err());
        assert!(TwoStateSystem::new(0.5.into(), 0.5.into(), one, one, 4, 4, 0).is_err());
    }

    #[test]
    fn no_superposition_no_coherence() {
        let tr = trajectory(1.0, 0.0, 1.04, 0.057);
        let rho = coherence_density(&tr, 20.0).unwrap();
        assert!(rho.iter().all(|c| c.norm() == 0.0));
        let s = sys(1.0, 0.0, 1);
        let ys: Vec<f64> = (0..16)
            .map(|k| dication_yield(&s, &tr, 20.0, k as f64 * PI / 8.0, 0.5).unwrap().total())
            .collect();
        let (lo, hi) = ys.iter().fold((f64::MAX, f64::MIN), |(a, b), &y| (a.min(y), b.max(y)));
        assert!(hi - lo < 1e-12);
    }

    #[test]
    fn initial_coherence_is_half_the_density() {
        let h = 0.5f64.sqrt();
        let tr = trajectory(h, h, 1.04, 0.057);
        let rho = coherence_density(&tr, 0.0).unwrap();
        for (r, c) in rho.iter().zip(&tr.chi1[0]) {
            assert!((r.re - 0.5 * c.norm_sqr()).abs() < 1e-14 && r.im.abs() < 1e-14 && r.re >= 0.0);
        }
        assert!(coherence_density(&tr, 15.0).is_err());
    }

    #[test]
    fn cauchy_schwarz_bound() {
        let tr = trajectory(0.6, 0.7, 1.04, 0.057);
        for t in tr.times_fs() {
            let rho = coherence_density(&tr, t).unwrap();
            let s: f64 = rho.iter().map(|c| c.norm()).sum::<f64>() * tr.grid.dr();
            assert!(s <= 0.6 * 0.7 + 1e-12);
        }
    }

    #[test]
    fn overlapping_packets_give_full_contrast() {
        let h = 0.5f64.sqrt();
        let tr = trajectory(h, h, 1.04, 0.057);
        let s = sys(h, h, 1);
        let ys: Vec<f64> = (0..64)
            .map(|j| dication_yield(&s, &tr, 0.0, 2.0 * PI * j as f64 / 64.0, 1.0).unwrap().total())
            .collect();
        let (lo, hi) = ys.iter().fold((f64::MAX, f64::MIN), |(a, b), &y| (a.min(y), b.max(y)));
        let mean = ys.iter().sum::<f64>() / ys.len() as f64;
        let norm = tr.chi1[0].iter().map(|c| c.norm_sqr()).sum::<f64>() * tr.grid.dr();
        assert!((mean - norm).abs() < 1e-9 * mean);
        assert!((hi - 2.0 * mean).abs() < 1e-2 * mean && lo < 1e-2 * mean, "{lo} {hi} {mean}");
    }

    fn harmonic_content(ys: &[f64]) -> Vec<f64> {
        let n = ys.len();
        (0..n / 2)
            .map(|h| {
                let c: Complex64 = ys
                    .iter()
                    .enumerate()
                    .map(|(j, y)| y * Complex64::from_polar(1.0, -2.0 * PI * (h * j) as f64 / n as f64))
                    .sum();
                c.norm() / n as f64
            })
            .collect()
    }

    #[test]
    fn k_photon_separation_gives_k_modulations() {
        let h = 0.5f64.sqrt();
        let tr = trajectory(h, h, 1.04, 0.057);
        for k in 1..=3u32 {
            let s = sys(h, h, k);
            let ys: Vec<f64> = (0..32)
                .map(|j| dication_yield(&s, &tr, 30.0, 2.0 * PI * j as f64 / 32.0, 0.8).unwrap().total())
                .collect();
            let hc = harmonic_content(&ys);
            let top = hc[1..].iter().cloned().fold(0.0, f64::max);
            for (i, v) in hc.iter().enumerate().skip(1) {
                if i == k as usize {
                    assert!(*v > 1e-3 * hc[0]);
                } else {
                    assert!(*v < 1e-10 * top, "K={k} harmonic {i}: {v}");
                }
            }
        }
    }

    #[test]
    fn yield_is_a_pure_cosine_in_phase_at_every_r() {
        let h = 0.5f64.sqrt();
        let tr = trajectory(h, h, 1.04, 0.057);
        let s = sys(h, h, 1);
        let n = 24;
        let profiles: Vec<YieldProfile> = (0..n)
            .map(|j| dication_yield(&s, &tr, 30.0, 2.0 * PI * j as f64 / n as f64, 0.8).unwrap())
            .collect();
        let mut best_depth = 0.0f64;
        for r in 0..profiles[0].y.len() {
            let ys: Vec<f64> = profiles.iter().map(|p| p.y[r]).collect();
            let hc = harmonic_content(&ys);
            if hc[1] == 0.0 {
                continue;
            }
            let rest: f64 = hc[2..].iter().cloned().fold(0.0, f64::max);
            assert!(rest < 1e-10 * hc[1] || hc[1] < 1e-200);
            if hc[0] > 1e-6 * profiles[0].y.iter().cloned().fold(0.0, f64::max) {
                best_depth = best_depth.max(hc[1] / hc[0]);
            }
        }
        let totals: Vec<f64> = profiles.iter().map(|p| p.total()).collect();
        let hc = harmonic_content(&totals);
        assert!(hc[1] / hc[0] <= best_depth + 1e-12);
    }

    #[test]
    fn energy_histogram_conserves_in_range_yield() {
        let h = 0.5f64.sqrt();
        let tr = trajectory(h, h, 1.04, 0.057);
        let p = dication_yield(&sys(h, h, 1), &tr, 30.0, 0.3, 0.8).unwrap();
        let edges: Vec<f64> = (0..=200).map(|k| 0.5 + 0.1 * k as f64).collect();
        let hist = p.energy_histogram(&edges);
        let inside: f64 = p
            .r
            .iter()
            .zip(&p.y)
            .filter(|(r, _)| {
                let e = hartree_to_ev(1.0 / **r);
                (0.5..20.5).contains(&e)
            })
            .map(|(_, y)| y * p.dr)
            .sum();
        assert!((hist.iter().sum::<f64>() - inside).abs() < 1e-12 * inside.max(1.0));
    }

    #[test]
    fn decoherence_limits() {
        let h = 0.5f64.sqrt();
        let same = trajectory(h, h, 1.0, 0.0);
        for s in decoherence_decomposition(&same).unwrap() {
            assert!((s.overlap - 1.0).abs() < 1e-10);
            assert!((s.contrast.unwrap() - 1.0).abs() < 1e-10);
            assert!((s.population1 - 0.5).abs() < 1e-15);
        }
        let offset = trajectory(h, h, 1.0, 0.057);
        for s in decoherence_decomposition(&offset).unwrap() {
            assert!((s.overlap - 1.0).abs() < 1e-10);
            assert!((s.contrast.unwrap() - 1.0).abs() < 1e-10);
        }
        let dephasing = decoherence_decomposition(&trajectory(h, h, 1.04, 0.057)).unwrap();
        let first = dephasing[0].contrast.unwrap();
        let last = dephasing.last().unwrap().contrast.unwrap();
        assert!(last < first);
    }
}
