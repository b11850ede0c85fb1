//! Nuclear wave functions on a spatial grid, overlaps and the R-resolved
//! phase difference between two packets.

use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::grid::SpatialGrid;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Wavefunction {
    grid: SpatialGrid,
    /// Reduced mass in electron masses.
    mass: f64,
    psi: Vec<Complex64>,
}

impl Wavefunction {
    pub fn from_values(grid: SpatialGrid, mass: f64, psi: Vec<Complex64>) -> Result<Self> {
        if !(mass > 0.0) || !mass.is_finite() {
            return Err(Error::invalid("mass", format!("{mass} must be positive")));
        }
        if psi.len() != grid.len() {
            return Err(Error::GridMismatch);
        }
        Ok(Wavefunction { grid, mass, psi })
    }

    /// Normalised Gaussian `exp(-(R-R0)^2 / (4 sigma^2) + i p0 (R-R0))`, so
    /// that the position variance is `sigma^2`.
    pub fn gaussian(grid: SpatialGrid, r0: f64, sigma: f64, p0: f64, mass: f64) -> Result<Self> {
        if !grid.contains(r0) {
            return Err(Error::invalid(
                "wavepacket.r0",
                format!("{r0} bohr outside [{}, {})", grid.r_min(), grid.r_max()),
            ));
        }
        if !(sigma > 0.0) || !sigma.is_finite() {
            return Err(Error::invalid("wavepacket.sigma", format!("{sigma} must be positive")));
        }
        if !p0.is_finite() {
            return Err(Error::invalid("wavepacket.p0", "momentum must be finite"));
        }
        let psi = grid
            .points()
            .into_iter()
            .map(|r| {
                let x = r - r0;
                Complex64::from_polar((-x * x / (4.0 * sigma * sigma)).exp(), p0 * x)
            })
            .collect();
        let mut wf = Wavefunction::from_values(grid, mass, psi)?;
        wf.normalize()?;
        Ok(wf)
    }

    pub fn grid(&self) -> &SpatialGrid {
        &self.grid
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn values(&self) -> &[Complex64] {
        &self.psi
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.psi
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.psi
    }

    pub fn norm_squared(&self) -> f64 {
        self.psi.iter().map(|c| c.norm_sqr()).sum::<f64>() * self.grid.dr()
    }

    pub fn normalize(&mut self) -> Result<()> {
        let n = self.norm_squared();
        if !(n > 0.0) {
            return Err(Error::ZeroInput("wave function"));
        }
        let s = 1.0 / n.sqrt();
        self.psi.iter_mut().for_each(|c| *c *= s);
        Ok(())
    }

    pub fn density(&self) -> Vec<f64> {
        self.psi.iter().map(|c| c.norm_sqr()).collect()
    }

    pub fn mean_position(&self) -> f64 {
        let (w, s) = self
            .psi
            .iter()
            .enumerate()
            .fold((0.0, 0.0), |(w, s), (j, c)| (w + c.norm_sqr(), s + c.norm_sqr() * self.grid.r(j)));
        s / w
    }

    pub fn position_variance(&self) -> f64 {
        let m = self.mean_position();
        let (w, s) = self.psi.iter().enumerate().fold((0.0, 0.0), |(w, s), (j, c)| {
            let x = self.grid.r(j) - m;
            (w + c.norm_sqr(), s + c.norm_sqr() * x * x)
        });
        s / w
    }

    /// `<p>` evaluated in momentum space.
    pub fn mean_momentum(&self) -> f64 {
        let mut buf = self.psi.clone();
        FftPlanner::new().plan_fft_forward(buf.len()).process(&mut buf);
        let k = self.grid.momenta();
        let (w, s) = buf
            .iter()
            .zip(&k)
            .fold((0.0, 0.0), |(w, s), (c, k)| (w + c.norm_sqr(), s + c.norm_sqr() * k));
        s / w
    }

    /// `<f(R)>` for a function sampled on the grid.
    pub fn expectation(&self, f: impl Fn(f64) -> f64) -> f64 {
        let (w, s) = self
            .psi
            .iter()
            .enumerate()
            .fold((0.0, 0.0), |(w, s), (j, c)| (w + c.norm_sqr(), s + c.norm_sqr() * f(self.grid.r(j))));
        s / w
    }
}

/// `∫ χ1*(R) χ2(R) dR`.
pub fn overlap(chi1: &Wavefunction, chi2: &Wavefunction) -> Result<Complex64> {
    if chi1.grid != chi2.grid {
        return Err(Error::GridMismatch);
    }
    let s: Complex64 = chi1.psi.iter().zip(&chi2.psi).map(|(a, b)| a.conj() * b).sum();
    Ok(s * chi1.grid.dr())
}

/// Unwrapped `arg(χ2 conj(χ1))` on the points where both densities exceed
/// `floor` times their own maximum.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseDifference {
    pub indices: Vec<usize>,
    pub r: Vec<f64>,
    pub phase: Vec<f64>,
    /// `|χ1|^2` at the retained points, used as a weight by shape metrics.
    pub weight: Vec<f64>,
}

impl PhaseDifference {
    pub fn len(&self) -> usize {
        self.r.len()
    }

    pub fn is_empty(&self) -> bool {
        self.r.is_empty()
    }

    /// Linear interpolation of the unwrapped phase at `r`; `None` outside the
    /// retained support.
    pub fn at(&self, r: f64) -> Option<f64> {
        let n = self.r.len();
        if n == 0 || r < self.r[0] || r > self.r[n - 1] {
            return None;
        }
        let i = self.r.partition_point(|&x| x <= r);
        if i == 0 {
            return Some(self.phase[0]);
        }
        if i == n {
            return Some(self.phase[n - 1]);
        }
        let t = (r - self.r[i - 1]) / (self.r[i] - self.r[i - 1]);
        Some(self.phase[i - 1] + t * (self.phase[i] - self.phase[i - 1]))
    }
}

pub fn wrap_phase(x: f64) -> f64 {
    let y = x.rem_euclid(2.0 * PI);
    if y > PI {
        y - 2.0 * PI
    } else {
        y
    }
}

pub fn phase_difference(chi1: &Wavefunction, chi2: &Wavefunction, floor: f64) -> Result<PhaseDifference> {
    if chi1.grid != chi2.grid {
        return Err(Error::GridMismatch);
    }
    if !(0.0..1.0).contains(&floor) {
        return Err(Error::invalid("propagation.density_floor", format!("{floor} not in [0, 1)")));
    }
    let d1 = chi1.density();
    let d2 = chi2.density();
    let m1 = d1.iter().cloned().fold(0.0, f64::max);
    let m2 = d2.iter().cloned().fold(0.0, f64::max);
    if m1 == 0.0 || m2 == 0.0 {
        return Err(Error::NoOverlap);
    }
    let indices: Vec<usize> = (0..d1.len())
        .filter(|&j| d1[j] >= floor * m1 && d2[j] >= floor * m2 && d1[j] > 0.0 && d2[j] > 0.0)
        .collect();
    if indices.is_empty() {
        return Err(Error::NoOverlap);
    }
    let raw: Vec<f64> = indices.iter().map(|&j| (chi2.psi[j] * chi1.psi[j].conj()).arg()).collect();
    let start = (0..indices.len())
        .max_by(|&a, &b| {
            let ja = indices[a];
            let jb = indices[b];
            (d1[ja] * d2[ja]).total_cmp(&(d1[jb] * d2[jb]))
        })
        .unwrap();
    let phase = unwrap_from(&raw, start);
    Ok(PhaseDifference {
        r: indices.iter().map(|&j| chi1.grid.r(j)).collect(),
        weight: indices.iter().map(|&j| d1[j]).collect(),
        indices,
        phase,
    })
}

/// Unwrap a wrapped phase sequence outward from `start`, keeping the value at
/// `start` in `(-π, π]`.
pub fn unwrap_from(raw: &[f64], start: usize) -> Vec<f64> {
    let mut out = vec![0.0; raw.len()];
    if raw.is_empty() {
        return out;
    }
    out[start] = wrap_phase(raw[start]);
    for j in start + 1..raw.len() {
        out[j] = out[j - 1] + wrap_phase(raw[j] - raw[j - 1]);
    }
    for j in (0..start).rev() {
        out[j] = out[j + 1] + wrap_phase(raw[j] - raw[j + 1]);
    }
    out
}
