//! Delay-scan Fourier analysis, per-bin cosine fits of phase scans, the
//! first moment of energy spectra and the phase-versus-1/E transform.

use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::wavefunction::{unwrap_from, wrap_phase};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ModulationSpectrum {
    /// Frequencies in inverse units of the sampling axis (1/fs for delays).
    pub frequencies: Vec<f64>,
    /// Single-sided amplitude spectrum, normalised so that a pure cosine of
    /// amplitude `A` peaks near `A`.
    pub amplitudes: Vec<f64>,
    /// Peak period from three-point parabolic interpolation; `None` when no
    /// peak rises above the numerical floor.
    pub dominant_period: Option<f64>,
    pub peak_amplitude: f64,
}

/// Relative amplitude below which a spectrum is considered empty.
pub const SPECTRAL_FLOOR: f64 = 1e-9;

fn check_uniform(x: &[f64]) -> Result<f64> {
    if x.len() < 2 {
        return Err(Error::TooFewSamples { needed: 2, got: x.len() });
    }
    let d = x[1] - x[0];
    if !(d > 0.0) {
        return Err(Error::NonUniformSampling { index: 1 });
    }
    for (i, w) in x.windows(2).enumerate() {
        if ((w[1] - w[0]) - d).abs() > 1e-9 * d.abs().max(1e-300) + 1e-12 * w[1].abs() {
            return Err(Error::NonUniformSampling { index: i + 1 });
        }
    }
    Ok(d)
}

/// Weighted straight-line fit `y ≈ slope·x + intercept`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

impl LineFit {
    pub fn eval(&self, x: f64) -> f64 {
        self.slope * x + self.intercept
    }
}

pub fn line_fit(x: &[f64], y: &[f64], w: Option<&[f64]>) -> Option<LineFit> {
    let n = x.len();
    if n < 2 || y.len() != n {
        return None;
    }
    let wt = |i: usize| w.map_or(1.0, |w| w[i]);
    let sw: f64 = (0..n).map(wt).sum();
    let mx = (0..n).map(|i| wt(i) * x[i]).sum::<f64>() / sw;
    let my = (0..n).map(|i| wt(i) * y[i]).sum::<f64>() / sw;
    let sxx: f64 = (0..n).map(|i| wt(i) * (x[i] - mx).powi(2)).sum();
    let sxy: f64 = (0..n).map(|i| wt(i) * (x[i] - mx) * (y[i] - my)).sum();
    let syy: f64 = (0..n).map(|i| wt(i) * (y[i] - my).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r_squared = if syy == 0.0 { 1.0 } else { (sxy * sxy) / (sxx * syy) };
    Some(LineFit {
        slope,
        intercept,
        r_squared,
    })
}

/// Detrended, Hann-windowed, zero-padded amplitude spectrum of a uniformly
/// sampled series. Only frequencies with at least `min_periods` periods in
/// the window are searched for the dominant peak.
pub fn modulation_spectrum(x: &[f64], y: &[f64], min_periods: f64) -> Result<ModulationSpectrum> {
    if x.len() != y.len() {
        return Err(Error::invalid("series", "axis and values differ in length"));
    }
    if x.len() < 8 {
        return Err(Error::TooFewSamples { needed: 8, got: x.len() });
    }
    let dx = check_uniform(x)?;
    let n = x.len();
    let fit = line_fit(x, y, None).expect("uniform axis");
    let window: Vec<f64> = (0..n).map(|j| 0.5 - 0.5 * (2.0 * PI * j as f64 / (n - 1) as f64).cos()).collect();
    let wsum: f64 = window.iter().sum();
    let padded = (8 * n).next_power_of_two();
    let mut buf: Vec<Complex64> = (0..padded)
        .map(|j| if j < n { Complex64::new((y[j] - fit.eval(x[j])) * window[j], 0.0) } else { Complex64::default() })
        .collect();
    FftPlanner::new().plan_fft_forward(padded).process(&mut buf);
    let half = padded / 2;
    let df = 1.0 / (padded as f64 * dx);
    let frequencies: Vec<f64> = (0..=half).map(|k| k as f64 * df).collect();
    let amplitudes: Vec<f64> = (0..=half).map(|k| 2.0 * buf[k].norm() / wsum).collect();
    let span = n as f64 * dx;
    let f_min = min_periods / span;
    let scale = y.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut best: Option<usize> = None;
    for k in 1..half {
        if frequencies[k] < f_min {
            continue;
        }
        if best.is_none_or(|b| amplitudes[k] > amplitudes[b]) {
            best = Some(k);
        }
    }
    let (dominant_period, peak_amplitude) = match best {
        Some(k) if amplitudes[k] > SPECTRAL_FLOOR * scale.max(f64::MIN_POSITIVE) => {
            let (a, b, c) = (amplitudes[k - 1], amplitudes[k], amplitudes[k + 1]);
            let den = a - 2.0 * b + c;
            let shift = if den < 0.0 { 0.5 * (a - c) / den } else { 0.0 };
            let f = (k as f64 + shift) * df;
            (Some(1.0 / f), b - 0.25 * (a - c) * shift)
        }
        Some(k) => (None, amplitudes[k]),
        None => (None, 0.0),
    };
    Ok(ModulationSpectrum {
        frequencies,
        amplitudes,
        dominant_period,
        peak_amplitude,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitSettings {
    /// A bin is significant when `c1 > significance · σ(c1)`.
    pub significance: f64,
    /// ... and when `c1` is at least this fraction of the largest `c1`.
    pub min_relative_amplitude: f64,
}

impl Default for FitSettings {
    fn default() -> Self {
        FitSettings {
            significance: 3.0,
            min_relative_amplitude: 0.01,
        }
    }
}

/// `Y(φ) ≈ c0 + c1 cos(φ - ΔΦ)` for one energy bin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseFitResult {
    pub c0: f64,
    pub c1: f64,
    /// ΔΦ in `(-π, π]`.
    pub phase: f64,
    pub residual_rms: f64,
    pub sigma_c0: f64,
    pub sigma_c1: f64,
    pub sigma_phase: f64,
    pub significant: bool,
}

fn solve3(m: [[f64; 3]; 3], r: [f64; 3]) -> Option<([f64; 3], [[f64; 3]; 3])> {
    let det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
    let scale = m.iter().flatten().fold(0.0f64, |a, b| a.max(b.abs()));
    if det.abs() <= 1e-12 * scale.powi(3) {
        return None;
    }
    let mut inv = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            let (a, b) = ((j + 1) % 3, (j + 2) % 3);
            let (c, d) = ((i + 1) % 3, (i + 2) % 3);
            inv[i][j] = (m[a][c] * m[b][d] - m[a][d] * m[b][c]) / det;
        }
    }
    let x = [0, 1, 2].map(|i| (0..3).map(|j| inv[i][j] * r[j]).sum());
    Some((x, inv))
}

/// Least-squares fit of one bin, harmonic order `k`. `sigma` gives
/// per-sample standard errors (weighted fit); otherwise errors come from
/// the residual scatter.
pub fn fit_cosine(phases: &[f64], y: &[f64], sigma: Option<&[f64]>, k: f64) -> Result<PhaseFitResult> {
    let n = phases.len();
    if n < 3 || y.len() != n {
        return Err(Error::TooFewSamples { needed: 3, got: n.min(y.len()) });
    }
    let mut m = [[0.0; 3]; 3];
    let mut r = [0.0; 3];
    for i in 0..n {
        let w = match sigma {
            Some(s) if s[i] > 0.0 => 1.0 / (s[i] * s[i]),
            _ => 1.0,
        };
        let f = [1.0, (k * phases[i]).cos(), (k * phases[i]).sin()];
        for a in 0..3 {
            r[a] += w * f[a] * y[i];
            for b in 0..3 {
                m[a][b] += w * f[a] * f[b];
            }
        }
    }
    let (x, inv) = solve3(m, r).ok_or_else(|| Error::invalid("phases", "phase samples do not determine a cosine"))?;
    let [c0, a, b] = x;
    let rss: f64 = (0..n)
        .map(|i| (y[i] - c0 - a * (k * phases[i]).cos() - b * (k * phases[i]).sin()).powi(2))
        .sum();
    let residual_rms = (rss / n as f64).sqrt();
    let s2 = if sigma.is_some() {
        1.0
    } else if n > 3 {
        rss / (n - 3) as f64
    } else {
        0.0
    };
    let c1 = a.hypot(b);
    let (caa, cbb, cab) = (s2 * inv[1][1], s2 * inv[2][2], s2 * inv[1][2]);
    let (sigma_c1, sigma_phase) = if c1 > 0.0 {
        (
            ((a * a * caa + b * b * cbb + 2.0 * a * b * cab) / (c1 * c1)).max(0.0).sqrt(),
            ((b * b * caa + a * a * cbb - 2.0 * a * b * cab) / c1.powi(4)).max(0.0).sqrt(),
        )
    } else {
        ((caa.max(cbb)).max(0.0).sqrt(), f64::INFINITY)
    };
    Ok(PhaseFitResult {
        c0,
        c1,
        phase: wrap_phase(b.atan2(a)),
        residual_rms,
        sigma_c0: (s2 * inv[0][0]).max(0.0).sqrt(),
        sigma_c1,
        sigma_phase,
        significant: false,
    })
}

/// Per-bin single-harmonic fits of `y[bin][sample]` against `phases`.
pub fn fit_phase_scan(phases: &[f64], y: &[Vec<f64>], sigma: Option<&[Vec<f64>]>, settings: &FitSettings) -> Result<Vec<PhaseFitResult>> {
    let mut fits = y
        .iter()
        .enumerate()
        .map(|(i, row)| fit_cosine(phases, row, sigma.map(|s| s[i].as_slice()), 1.0))
        .collect::<Result<Vec<_>>>()?;
    let max_c1 = fits.iter().fold(0.0f64, |m, f| m.max(f.c1));
    for f in &mut fits {
        f.significant = f.c1 > 0.0 && f.c1 > settings.significance * f.sigma_c1 && f.c1 >= settings.min_relative_amplitude * max_c1;
    }
    Ok(fits)
}

/// Number of modulations per 2π: the harmonic order with the largest fitted
/// amplitude, searching `1..=max_k`.
pub fn dominant_harmonic(phases: &[f64], y: &[f64], max_k: u32) -> Result<u32> {
    let mut best = (1, -1.0);
    for k in 1..=max_k {
        let f = fit_cosine(phases, y, None, k as f64)?;
        if f.c1 > best.1 {
            best = (k, f.c1);
        }
    }
    Ok(best.0)
}

/// Intensity-weighted mean energy for each phase sample of `y[bin][sample]`.
pub fn first_moment(energies: &[f64], y: &[Vec<f64>]) -> Result<Vec<f64>> {
    if y.len() != energies.len() || y.is_empty() {
        return Err(Error::invalid("energies", "one energy per bin required"));
    }
    let samples = y[0].len();
    (0..samples)
        .map(|s| {
            let (mut w, mut m) = (0.0, 0.0);
            for (e, row) in energies.iter().zip(y) {
                if row[s] < 0.0 {
                    return Err(Error::invalid("yield", "first moment needs non-negative values"));
                }
                w += row[s];
                m += row[s] * e;
            }
            if w <= 0.0 {
                return Err(Error::ZeroInput("phase column"));
            }
            Ok(m / w)
        })
        .collect()
}

/// Significant bins ordered by increasing `1/E` with the phase unwrapped
/// outward from the highest-amplitude bin.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseCurve {
    pub inverse_energy: Vec<f64>,
    pub energy: Vec<f64>,
    pub phase: Vec<f64>,
    pub amplitude: Vec<f64>,
    pub offset: Vec<f64>,
}

pub fn phase_vs_inverse_energy(fits: &[PhaseFitResult], energies: &[f64]) -> PhaseCurve {
    let mut pts: Vec<(f64, &PhaseFitResult)> = fits
        .iter()
        .zip(energies)
        .filter(|(f, e)| f.significant && **e > 0.0)
        .map(|(f, e)| (1.0 / e, f))
        .collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let raw: Vec<f64> = pts.iter().map(|p| p.1.phase).collect();
    let start = pts
        .iter()
        .enumerate()
        .max_by(|a, b| a.1 .1.c1.total_cmp(&b.1 .1.c1))
        .map_or(0, |x| x.0);
    PhaseCurve {
        inverse_energy: pts.iter().map(|p| p.0).collect(),
        energy: pts.iter().map(|p| 1.0 / p.0).collect(),
        phase: unwrap_from(&raw, start),
        amplitude: pts.iter().map(|p| p.1.c1).collect(),
        offset: pts.iter().map(|p| p.1.c0).collect(),
    }
}

/// Regions of a weighted phase curve used to quantify the hockey-stick
/// shape, as fractions of the cumulative weight along increasing `x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HockeySettings {
    pub lead_from: f64,
    pub lead_to: f64,
    pub trail_to: f64,
    pub min_r_squared: f64,
    pub min_departure: f64,
}

impl Default for HockeySettings {
    fn default() -> Self {
        HockeySettings {
            lead_from: 0.5,
            lead_to: 0.99,
            trail_to: 0.1,
            min_r_squared: 0.99,
            min_departure: 0.3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HockeyMetrics {
    pub line: LineFit,
    /// Largest `|phase - line|` in the trailing region.
    pub departure: f64,
    pub lead_points: usize,
    pub trail_points: usize,
    pub passes: bool,
}

/// The leading region (large `x`, the front of a dissociating packet) is fit
/// by a straight line; the trailing region (small `x`) must bend away from it.
pub fn hockey_stick(x: &[f64], phase: &[f64], weight: &[f64], s: &HockeySettings) -> Option<HockeyMetrics> {
    let n = x.len();
    if n < 3 || phase.len() != n || weight.len() != n {
        return None;
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|a, b| x[*a].total_cmp(&x[*b]));
    let total: f64 = weight.iter().sum();
    if !(total > 0.0) {
        return None;
    }
    let mut cum = 0.0;
    let mut lead = (Vec::new(), Vec::new());
    let mut trail = Vec::new();
    for &i in &idx {
        cum += weight[i];
        let c = cum / total;
        if c >= s.lead_from && c <= s.lead_to {
            lead.0.push(x[i]);
            lead.1.push(phase[i]);
        }
        if c <= s.trail_to {
            trail.push(i);
        }
    }
    let line = line_fit(&lead.0, &lead.1, None)?;
    let departure = trail.iter().map(|&i| (phase[i] - line.eval(x[i])).abs()).fold(0.0, f64::max);
    Some(HockeyMetrics {
        line,
        departure,
        lead_points: lead.0.len(),
        trail_points: trail.len(),
        passes: line.r_squared > s.min_r_squared && departure > s.min_departure && lead.0.len() >= 3,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn delays() -> Vec<f64> {
        (0..=200).map(|k| 2.0 * k as f64).collect()
    }

    #[test]
    fn constant_input_has_no_peak() {
        let x = delays();
        let y = vec![3.7; x.len()];
        assert_eq!(modulation_spectrum(&x, &y, 3.0).unwrap().dominant_period, None);
    }

    #[test]
    fn recovers_28_fs() {
        let x = delays();
        let y: Vec<f64> = x.iter().map(|t| 1.0 + 0.3 * (2.0 * PI * t / 28.0).cos()).collect();
        let s = modulation_spectrum(&x, &y, 3.0).unwrap();
        let p = s.dominant_period.unwrap();
        assert!((p - 28.0).abs() < 1.0, "{p}");
        assert!((s.peak_amplitude - 0.3).abs() < 0.05);
    }

    #[test]
    fn non_uniform_sampling_is_rejected() {
        let mut x = delays();
        x[50] += 0.3;
        let y = vec![1.0; x.len()];
        assert!(matches!(modulation_spectrum(&x, &y, 3.0), Err(Error::NonUniformSampling { index: 50 })));
    }

    #[test]
    fn exact_cosine_fit() {
        let phases: Vec<f64> = (0..16).map(|k| 2.0 * PI * k as f64 / 16.0).collect();
        let y: Vec<f64> = phases.iter().map(|p| 1.0 + 0.5 * p.cos()).collect();
        let f = fit_cosine(&phases, &y, None, 1.0).unwrap();
        assert!((f.c0 - 1.0).abs() < 1e-10 && (f.c1 - 0.5).abs() < 1e-10 && f.phase.abs() < 1e-10);
        assert!(f.residual_rms < 1e-12);
        assert!(fit_cosine(&phases[..2], &y[..2], None, 1.0).is_err());
    }

    #[test]
    fn recovers_energy_dependent_phase() {
        let phases: Vec<f64> = (0..24).map(|k| 2.0 * PI * k as f64 / 24.0).collect();
        let energies: Vec<f64> = (0..30).map(|k| 2.0 + 0.25 * k as f64).collect();
        let truth = |e: f64| 0.2 + 3.0 / e;
        let y: Vec<Vec<f64>> = energies
            .iter()
            .map(|e| phases.iter().map(|p| 1.0 + 0.5 * (p - truth(*e)).cos()).collect())
            .collect();
        let fits = fit_phase_scan(&phases, &y, None, &FitSettings::default()).unwrap();
        for (f, e) in fits.iter().zip(&energies) {
            assert!(wrap_phase(f.phase - truth(*e)).abs() < 1e-6);
            assert!(f.significant);
        }
        let curve = phase_vs_inverse_energy(&fits, &energies);
        assert!(curve.inverse_energy.windows(2).all(|w| w[1] > w[0]));
        for (x, p) in curve.inverse_energy.iter().zip(&curve.phase) {
            assert!((p - (0.2 + 3.0 * x)).abs() < 1e-6);
        }
        let line = line_fit(&curve.inverse_energy, &curve.phase, None).unwrap();
        assert!(line.r_squared > 0.99);
    }

    #[test]
    fn distinguishes_one_and_two_photon_separation() {
        let phases: Vec<f64> = (0..32).map(|k| 2.0 * PI * k as f64 / 32.0).collect();
        let two: Vec<f64> = phases.iter().map(|p| 1.0 + 0.4 * (2.0 * p - 0.3).cos()).collect();
        let f = fit_cosine(&phases, &two, None, 1.0).unwrap();
        assert!(f.c1 < 1e-12);
        assert_eq!(dominant_harmonic(&phases, &two, 4).unwrap(), 2);
        let one: Vec<f64> = phases.iter().map(|p| 1.0 + 0.4 * (p - 0.3).cos()).collect();
        assert_eq!(dominant_harmonic(&phases, &one, 4).unwrap(), 1);
    }

    #[test]
    fn first_moment_cases() {
        let e = vec![1.0, 2.0, 3.0];
        let flat = vec![vec![1.0; 8], vec![2.0; 8], vec![1.0; 8]];
        let m = first_moment(&e, &flat).unwrap();
        assert!(m.iter().all(|x| (x - 2.0).abs() < 1e-15));
        let single = vec![vec![0.0; 4], vec![0.7; 4], vec![0.0; 4]];
        assert!(first_moment(&e, &single).unwrap().iter().all(|x| *x == 2.0));
        let zero = vec![vec![0.0; 4]; 3];
        assert!(matches!(first_moment(&e, &zero), Err(Error::ZeroInput(_))));
    }

    #[test]
    fn first_moment_oscillates_with_energy_dependent_phase() {
        let phases: Vec<f64> = (0..64).map(|k| 4.0 * PI * k as f64 / 64.0).collect();
        let energies: Vec<f64> = (0..30).map(|k| 2.0 + 0.25 * k as f64).collect();
        let y: Vec<Vec<f64>> = energies
            .iter()
            .map(|e| phases.iter().map(|p| (1.0 + 0.5 * (p - 0.2 - 3.0 / e).cos()) * (-(e - 5.0f64).powi(2)).exp()).collect())
            .collect();
        let m = first_moment(&energies, &y).unwrap();
        let f = fit_cosine(&phases, &m, None, 1.0).unwrap();
        assert!(f.c1 > 1e-3);
        // period 2π: samples 2π apart agree
        for i in 0..32 {
            assert!((m[i] - m[i + 32]).abs() < 1e-12);
        }
    }

    #[test]
    fn flat_phase_is_flat_in_inverse_energy() {
        let phases: Vec<f64> = (0..12).map(|k| 2.0 * PI * k as f64 / 12.0).collect();
        let energies = vec![2.0, 3.0, 4.0, 5.0];
        let y: Vec<Vec<f64>> = energies.iter().map(|_| phases.iter().map(|p| 2.0 + (p - 1.1).cos()).collect()).collect();
        let fits = fit_phase_scan(&phases, &y, None, &FitSettings::default()).unwrap();
        let c = phase_vs_inverse_energy(&fits, &energies);
        assert!(c.phase.iter().all(|p| (p - 1.1).abs() < 1e-10));
    }

    #[test]
    fn hockey_metric_on_synthetic_curves() {
        let x: Vec<f64> = (0..200).map(|k| 3.0 + 0.02 * k as f64).collect();
        let w: Vec<f64> = x.iter().map(|r| (-(r - 5.0f64).powi(2)).exp()).collect();
        let straight: Vec<f64> = x.iter().map(|r| 2.0 * r - 1.0).collect();
        let m = hockey_stick(&x, &straight, &w, &HockeySettings::default()).unwrap();
        assert!(m.line.r_squared > 0.999 && m.departure < 1e-9 && !m.passes);
        let bent: Vec<f64> = x.iter().map(|r| 2.0 * r - 1.0 + 3.0 * (-(r - 3.0) * 4.0).exp()).collect();
        let m = hockey_stick(&x, &bent, &w, &HockeySettings::default()).unwrap();
        assert!(m.passes, "{m:?}");
    }

    proptest! {
        #[test]
        fn fit_is_exact_on_noiseless_data(c0 in -5.0f64..5.0, c1 in 0.01f64..3.0, d in -3.0f64..3.0, n in 3usize..40) {
            let phases: Vec<f64> = (0..n).map(|k| 2.0 * PI * k as f64 / n as f64 + 0.1).collect();
            let y: Vec<f64> = phases.iter().map(|p| c0 + c1 * (p - d).cos()).collect();
            let f = fit_cosine(&phases, &y, None, 1.0).unwrap();
            prop_assert!((f.c0 - c0).abs() < 1e-10);
            prop_assert!((f.c1 - c1).abs() < 1e-10);
            prop_assert!(wrap_phase(f.phase - d).abs() < 1e-9);
        }

        #[test]
        fn global_phase_equivariance(d in -3.0f64..3.0, delta in -6.0f64..6.0) {
            let phases: Vec<f64> = (0..20).map(|k| 2.0 * PI * k as f64 / 20.0).collect();
            let y: Vec<f64> = phases.iter().map(|p| 1.0 + 0.3 * (p - d).cos()).collect();
            let z: Vec<f64> = phases.iter().map(|p| 1.0 + 0.3 * (p - d - delta).cos()).collect();
            let a = fit_cosine(&phases, &y, None, 1.0).unwrap();
            let b = fit_cosine(&phases, &z, None, 1.0).unwrap();
            prop_assert!(wrap_phase(b.phase - a.phase - delta).abs() < 1e-9);
            prop_assert!((a.c1 - b.c1).abs() < 1e-10 && (a.c0 - b.c0).abs() < 1e-10);
        }

        #[test]
        fn spectrum_peak_ignores_offset_and_slow_trend(period in 20.0f64..60.0, c in -10.0f64..10.0, slope in -0.05f64..0.05) {
            let x = delays();
            let base: Vec<f64> = x.iter().map(|t| 1.0 + 0.3 * (2.0 * PI * t / period).cos()).collect();
            let shifted: Vec<f64> = x.iter().zip(&base).map(|(t, y)| y + c + slope * t).collect();
            let p0 = modulation_spectrum(&x, &base, 3.0).unwrap().dominant_period.unwrap();
            let p1 = modulation_spectrum(&x, &shifted, 3.0).unwrap().dominant_period.unwrap();
            prop_assert!((p0 - p1).abs() < 1e-6 * p0);
        }
    }
}
