//! Spectral pulse-shaper model and shaped-field synthesis.
//!
//! Fields are analytic signals with the convention
//! `E(t) = Σ_ν E(ν) exp(-i 2π ν t)`, so a carrier at `ν0 > 0` appears at
//! positive frequency and the spectral factor `exp(i 2π τ ν)` delays a pulse
//! by `τ`. Times are in fs and frequencies in PHz.

use std::f64::consts::{LN_2, PI};

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::units::SPEED_OF_LIGHT_NM_PER_FS;
use crate::wavefunction::wrap_phase;
use crate::{Error, Result};

/// Gaussian pulse sampled on a symmetric time window `[-T/2, T/2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PulseSpec {
    /// Carrier frequency (PHz).
    pub carrier_phz: f64,
    /// Intensity FWHM of the envelope (fs).
    pub fwhm_fs: f64,
    /// Peak field amplitude (arbitrary units).
    pub amplitude: f64,
    pub samples: usize,
    pub dt_fs: f64,
}

impl PulseSpec {
    pub fn new(carrier_phz: f64, fwhm_fs: f64, amplitude: f64, samples: usize, dt_fs: f64) -> Result<Self> {
        if !(fwhm_fs > 0.0) || !fwhm_fs.is_finite() {
            return Err(Error::invalid("pulse.fwhm_fs", format!("{fwhm_fs} must be positive")));
        }
        if !(carrier_phz >= 0.0) || !carrier_phz.is_finite() {
            return Err(Error::invalid("pulse.wavelength_nm", "carrier must be non-negative"));
        }
        if !amplitude.is_finite() || amplitude < 0.0 {
            return Err(Error::invalid("pulse.amplitude", "must be non-negative"));
        }
        if samples < 16 || !samples.is_power_of_two() {
            return Err(Error::invalid("pulse.samples", format!("{samples} is not a power of two >= 16")));
        }
        if !(dt_fs > 0.0) || !dt_fs.is_finite() {
            return Err(Error::invalid("pulse.dt_fs", "must be positive"));
        }
        let p = PulseSpec {
            carrier_phz,
            fwhm_fs,
            amplitude,
            samples,
            dt_fs,
        };
        // Spectral FWHM of the field intensity is 2 ln2 / (π FWHM_t).
        let bandwidth = 2.0 * LN_2 / (PI * fwhm_fs);
        if p.nyquist_phz() < carrier_phz + 4.0 * bandwidth {
            return Err(Error::invalid("pulse.dt_fs", "sampling too coarse for the carrier and bandwidth"));
        }
        if p.window_fs() < 8.0 * fwhm_fs {
            return Err(Error::invalid("pulse.samples", "time window shorter than 8 pulse widths"));
        }
        Ok(p)
    }

    pub fn from_wavelength(wavelength_nm: f64, fwhm_fs: f64, amplitude: f64, samples: usize, dt_fs: f64) -> Result<Self> {
        if !(wavelength_nm > 0.0) {
            return Err(Error::invalid("pulse.wavelength_nm", "must be positive"));
        }
        Self::new(SPEED_OF_LIGHT_NM_PER_FS / wavelength_nm, fwhm_fs, amplitude, samples, dt_fs)
    }

    pub fn window_fs(&self) -> f64 {
        self.samples as f64 * self.dt_fs
    }

    pub fn nyquist_phz(&self) -> f64 {
        0.5 / self.dt_fs
    }

    /// Carrier angular frequency (rad/fs).
    pub fn omega0(&self) -> f64 {
        2.0 * PI * self.carrier_phz
    }

    pub fn times(&self) -> Vec<f64> {
        let half = (self.samples / 2) as f64;
        (0..self.samples).map(|j| (j as f64 - half) * self.dt_fs).collect()
    }

    /// Frequencies in FFT order.
    pub fn frequencies(&self) -> Vec<f64> {
        let n = self.samples as i64;
        let df = 1.0 / self.window_fs();
        (0..n).map(|k| if k < n / 2 { k } else { k - n }).map(|k| k as f64 * df).collect()
    }

    /// Field envelope whose square has the configured FWHM.
    pub fn envelope(&self, t: f64) -> f64 {
        self.amplitude * (-2.0 * LN_2 * t * t / (self.fwhm_fs * self.fwhm_fs)).exp()
    }

    pub fn field(&self, t: f64) -> Complex64 {
        Complex64::from_polar(self.envelope(t), -self.omega0() * t)
    }

    /// `E(ν)` on [`Self::frequencies`].
    pub fn spectrum(&self) -> Vec<Complex64> {
        let samples: Vec<Complex64> = self.times().iter().map(|&t| self.field(t)).collect();
        analyse(self, samples)
    }

    pub fn spectral_intensity(&self) -> Vec<f64> {
        self.spectrum().iter().map(|c| c.norm_sqr()).collect()
    }
}

/// `E_k = (1/N) Σ_j E(t_j) exp(+i 2π ν_k t_j)`.
fn analyse(p: &PulseSpec, mut buf: Vec<Complex64>) -> Vec<Complex64> {
    let n = buf.len();
    FftPlanner::new().plan_fft_inverse(n).process(&mut buf);
    let t0 = p.times()[0];
    buf.iter_mut()
        .zip(p.frequencies())
        .for_each(|(c, nu)| *c *= Complex64::from_polar(1.0 / n as f64, 2.0 * PI * nu * t0));
    buf
}

/// `E(t_j) = Σ_k E_k exp(-i 2π ν_k t_j)`.
fn synthesise(p: &PulseSpec, spectrum: &[Complex64]) -> Vec<Complex64> {
    let t0 = p.times()[0];
    let mut buf: Vec<Complex64> = spectrum
        .iter()
        .zip(p.frequencies())
        .map(|(c, nu)| c * Complex64::from_polar(1.0, -2.0 * PI * nu * t0))
        .collect();
    FftPlanner::new().plan_fft_forward(buf.len()).process(&mut buf);
    buf
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShaperMask {
    pub a_tot: f64,
    pub a_r: f64,
    pub tau_fs: f64,
    pub phi_l: f64,
    /// Locking frequency (PHz).
    pub nu_l_phz: f64,
}

impl ShaperMask {
    pub fn new(a_tot: f64, a_r: f64, tau_fs: f64, phi_l: f64, nu_l_phz: f64) -> Result<Self> {
        if !(a_tot > 0.0) || !a_tot.is_finite() {
            return Err(Error::invalid("mask.a_tot", format!("{a_tot} must be positive")));
        }
        if !(a_r >= 0.0) || !a_r.is_finite() {
            return Err(Error::invalid("mask.a_r", format!("{a_r} must be non-negative")));
        }
        if !tau_fs.is_finite() || !phi_l.is_finite() || !nu_l_phz.is_finite() {
            return Err(Error::invalid("mask", "delay, phase and locking frequency must be finite"));
        }
        Ok(ShaperMask {
            a_tot,
            a_r,
            tau_fs,
            phi_l,
            nu_l_phz,
        })
    }

    /// Phase of the delayed replica relative to the main pulse.
    pub fn controllable_phase(&self) -> f64 {
        controllable_phase(self.phi_l, self.nu_l_phz, self.tau_fs)
    }
}

/// `A_tot (1 + A_R exp(i 2π τ (ν - ν_L) + i φ_L))`.
pub fn shaper_mask(nu_phz: f64, mask: &ShaperMask) -> Complex64 {
    let arg = 2.0 * PI * mask.tau_fs * (nu_phz - mask.nu_l_phz) + mask.phi_l;
    mask.a_tot * (Complex64::new(1.0, 0.0) + mask.a_r * Complex64::from_polar(1.0, arg))
}

/// `φ_L - 2π ν_L τ` wrapped to `(-π, π]`.
pub fn controllable_phase(phi_l: f64, nu_l_phz: f64, tau_fs: f64) -> f64 {
    // Reduce the large product modulo one cycle before scaling by 2π.
    let cycles = (nu_l_phz * tau_fs).rem_euclid(1.0);
    wrap_phase(phi_l - 2.0 * PI * cycles)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShapedField {
    pub times: Vec<f64>,
    pub field: Vec<Complex64>,
}

impl ShapedField {
    pub fn intensity(&self) -> Vec<f64> {
        self.field.iter().map(|c| c.norm_sqr()).collect()
    }

    /// Value at the sample nearest to `t`.
    pub fn at(&self, t: f64) -> Complex64 {
        let dt = self.times[1] - self.times[0];
        let j = ((t - self.times[0]) / dt).round().clamp(0.0, (self.times.len() - 1) as f64) as usize;
        self.field[j]
    }
}

/// Inverse transform of `M(ν) E(ν)`.
pub fn shaped_field(pulse: &PulseSpec, mask: &ShaperMask) -> Result<ShapedField> {
    let half = 0.5 * pulse.window_fs();
    if mask.tau_fs.abs() + 3.0 * pulse.fwhm_fs > half {
        return Err(Error::DelayAliased {
            delay_fs: mask.tau_fs,
            window_fs: pulse.window_fs(),
        });
    }
    let spec: Vec<Complex64> = pulse
        .spectrum()
        .into_iter()
        .zip(pulse.frequencies())
        .map(|(e, nu)| e * shaper_mask(nu, mask))
        .collect();
    Ok(ShapedField {
        times: pulse.times(),
        field: synthesise(pulse, &spec),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvelopePeak {
    pub time_fs: f64,
    /// Field magnitude at the peak.
    pub amplitude: f64,
}

/// Local maxima of `|E(t)|²` above `threshold` times the global maximum,
/// refined by a parabola through the logarithm of the three nearest samples.
pub fn envelope_peaks(field: &ShapedField, threshold: f64) -> Vec<EnvelopePeak> {
    let y = field.intensity();
    let max = y.iter().cloned().fold(0.0, f64::max);
    if max == 0.0 {
        return Vec::new();
    }
    let dt = field.times[1] - field.times[0];
    let mut peaks = Vec::new();
    for j in 1..y.len() - 1 {
        if y[j] > y[j - 1] && y[j] >= y[j + 1] && y[j] >= threshold * max {
            let (a, b, c) = (y[j - 1].ln(), y[j].ln(), y[j + 1].ln());
            let den = a - 2.0 * b + c;
            let (shift, peak) = if den < 0.0 {
                let s = 0.5 * (a - c) / den;
                (s, b - 0.25 * (a - c) * s)
            } else {
                (0.0, b)
            };
            peaks.push(EnvelopePeak {
                time_fs: field.times[j] + shift * dt,
                amplitude: peak.exp().sqrt(),
            });
        }
    }
    peaks
}

/// Spectrum of the `n`-th power of the field, sorted by frequency.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub frequency_phz: Vec<f64>,
    pub intensity: Vec<f64>,
}

impl Spectrum {
    /// FWHM from linear interpolation of the half-maximum crossings on both
    /// sides of the peak.
    pub fn fwhm(&self) -> Option<f64> {
        let y = &self.intensity;
        let x = &self.frequency_phz;
        let (ip, &ymax) = y.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1))?;
        if ymax <= 0.0 {
            return None;
        }
        let half = 0.5 * ymax;
        let mut lo = None;
        for j in (0..ip).rev() {
            if y[j] < half {
                lo = Some(x[j] + (half - y[j]) / (y[j + 1] - y[j]) * (x[j + 1] - x[j]));
                break;
            }
        }
        let mut hi = None;
        for j in ip + 1..y.len() {
            if y[j] < half {
                hi = Some(x[j - 1] + (y[j - 1] - half) / (y[j - 1] - y[j]) * (x[j] - x[j - 1]));
                break;
            }
        }
        Some(hi? - lo?)
    }
}

/// Spectral intensity of `E(t)^n`; its FWHM is `√n` times that of `E(t)`.
pub fn nphoton_effective_field(pulse: &PulseSpec, n: u32) -> Result<Spectrum> {
    if n == 0 {
        return Err(Error::invalid("n", "photon order must be >= 1"));
    }
    let samples: Vec<Complex64> = pulse.times().iter().map(|&t| pulse.field(t).powu(n)).collect();
    let spec = analyse(pulse, samples);
    // n ν0 may exceed the Nyquist frequency; place each bin on the alias
    // closest to the harmonic.
    let centre = n as f64 * pulse.carrier_phz;
    let span = 1.0 / pulse.dt_fs;
    let mut pts: Vec<(f64, f64)> = pulse
        .frequencies()
        .into_iter()
        .zip(spec)
        .map(|(nu, c)| (nu + span * ((centre - nu) / span).round(), c.norm_sqr()))
        .collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(Spectrum {
        frequency_phz: pts.iter().map(|p| p.0).collect(),
        intensity: pts.iter().map(|p| p.1).collect(),
    })
}
