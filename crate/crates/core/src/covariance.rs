//! Shot-by-shot covariance between two fragment species, resolved in pair
//! KER and grouped by scan point.
//!
//! For each shot and KER bin `i`, `A_i` (`B_i`) is the number of distinct
//! species-A (species-B) ions that belong to at least one candidate A×B pair
//! passing the momentum gate with KER in bin `i`. The map value is
//! `⟨A_i B_i⟩ - ⟨A_i⟩⟨B_i⟩` over the shots of a scan point. Statistics are
//! accumulated as exact integer moment sums, which merge associatively and
//! also give the delete-one-shot jackknife variance in closed form.

use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::events::{pair_ker, IonEvent, Momentum, ShotRecord, SpeciesTable};
use crate::{Error, Result};

/// Shots per parallel work unit.
pub const ACCUMULATION_CHUNK: usize = 2048;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScanAxis {
    Delay,
    Phase,
}

impl ScanAxis {
    pub fn value(&self, shot: &ShotRecord) -> f64 {
        match self {
            ScanAxis::Delay => shot.delay_fs,
            ScanAxis::Phase => shot.phase_rad,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            ScanAxis::Delay => "delay_fs",
            ScanAxis::Phase => "phase_rad",
        }
    }
}

/// `|p_A + p_B| < epsilon`.
pub fn momentum_gate(pa: &Momentum, pb: &Momentum, epsilon: f64) -> bool {
    let s: f64 = (0..3).map(|k| (pa[k] + pb[k]).powi(2)).sum();
    s < epsilon * epsilon
}

#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceSettings {
    pub species_a: u32,
    pub species_b: u32,
    pub mass_a_au: f64,
    pub mass_b_au: f64,
    pub ker_edges_ev: Vec<f64>,
    /// Momentum-conservation gate; `None` accepts every combination.
    pub epsilon: Option<f64>,
    pub axis: ScanAxis,
}

impl CovarianceSettings {
    pub fn new(
        species: &SpeciesTable,
        species_a: u32,
        species_b: u32,
        ker_edges_ev: Vec<f64>,
        epsilon: Option<f64>,
        axis: ScanAxis,
    ) -> Result<Self> {
        let mass_a_au = species.get(species_a)?.mass_au();
        let mass_b_au = species.get(species_b)?.mass_au();
        if ker_edges_ev.len() < 2 || ker_edges_ev.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("scan.ker_edges", "bin edges must be strictly increasing"));
        }
        if let Some(e) = epsilon {
            if !(e > 0.0) {
                return Err(Error::invalid("covariance.gate_epsilon_au", "must be positive"));
            }
        }
        Ok(CovarianceSettings {
            species_a,
            species_b,
            mass_a_au,
            mass_b_au,
            ker_edges_ev,
            epsilon,
            axis,
        })
    }

    pub fn bins(&self) -> usize {
        self.ker_edges_ev.len() - 1
    }

    pub fn bin_of(&self, ker: f64) -> Option<usize> {
        let k = self.ker_edges_ev.partition_point(|&e| e <= ker);
        (k >= 1 && k < self.ker_edges_ev.len()).then(|| k - 1)
    }

    pub fn centers(&self) -> Vec<f64> {
        self.ker_edges_ev.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
    }

    /// Candidate pairs of a shot as `(bin, index of A ion, index of B ion)`.
    fn candidates(&self, ions: &[IonEvent]) -> Vec<(usize, usize, usize)> {
        let mut out = Vec::new();
        for (ia, a) in ions.iter().enumerate().filter(|(_, x)| x.species == self.species_a) {
            for (ib, b) in ions.iter().enumerate().filter(|(_, x)| x.species == self.species_b) {
                if ia == ib {
                    continue;
                }
                if let Some(eps) = self.epsilon {
                    if !momentum_gate(&a.momentum, &b.momentum, eps) {
                        continue;
                    }
                }
                let ker = pair_ker(&a.momentum, &b.momentum, self.mass_a_au, self.mass_b_au);
                if let Some(bin) = self.bin_of(ker) {
                    out.push((bin, ia, ib));
                }
            }
        }
        out
    }

    /// Per-bin `(A_i, B_i)` for one shot, listing only non-zero bins.
    pub fn shot_counts(&self, ions: &[IonEvent]) -> Vec<(usize, u64, u64)> {
        let mut c = self.candidates(ions);
        c.sort_unstable();
        let mut out = Vec::new();
        let mut k = 0;
        while k < c.len() {
            let bin = c[k].0;
            let end = k + c[k..].iter().take_while(|x| x.0 == bin).count();
            let mut a: Vec<usize> = c[k..end].iter().map(|x| x.1).collect();
            let mut b: Vec<usize> = c[k..end].iter().map(|x| x.2).collect();
            a.sort_unstable();
            a.dedup();
            b.sort_unstable();
            b.dedup();
            out.push((bin, a.len() as u64, b.len() as u64));
            k = end;
        }
        out
    }
}

/// Exact moment sums of `(a, b)` over shots; the shot count is kept per
/// scan point.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Moments {
    pub a: u64,
    pub b: u64,
    pub ab: u64,
    pub aa: u64,
    pub bb: u64,
    pub aab: u64,
    pub abb: u64,
    pub aabb: u64,
}

impl Moments {
    pub fn add(&mut self, a: u64, b: u64) {
        self.a += a;
        self.b += b;
        self.ab += a * b;
        self.aa += a * a;
        self.bb += b * b;
        self.aab += a * a * b;
        self.abb += a * b * b;
        self.aabb += a * a * b * b;
    }

    pub fn merge(&mut self, o: &Moments) {
        self.a += o.a;
        self.b += o.b;
        self.ab += o.ab;
        self.aa += o.aa;
        self.bb += o.bb;
        self.aab += o.aab;
        self.abb += o.abb;
        self.aabb += o.aabb;
    }

    /// `⟨ab⟩ - ⟨a⟩⟨b⟩` over `n` shots.
    pub fn covariance(&self, n: u64) -> f64 {
        let n = n as i128;
        let num = n * self.ab as i128 - self.a as i128 * self.b as i128;
        num as f64 / (n * n) as f64
    }

    /// Delete-one jackknife standard error over `n >= 2` shots.
    ///
    /// Leaving out shot `j` gives `f_j = C + g_j` with
    /// `M² g_j = S_b a_j + S_a b_j - (M+1) a_j b_j`, `M = n - 1`, so the
    /// spread of the replicates follows from the moment sums alone.
    pub fn jackknife_sigma(&self, n: u64) -> f64 {
        if n < 2 {
            return f64::NAN;
        }
        let (sa, sb) = (self.a as i128, self.b as i128);
        let m1 = n as i128;
        let g_sum = 2 * sa * sb - m1 * self.ab as i128;
        let g_sq = sb * sb * self.aa as i128 + sa * sa * self.bb as i128 + m1 * m1 * self.aabb as i128 + 2 * sa * sb * self.ab as i128
            - 2 * sb * m1 * self.aab as i128
            - 2 * sa * m1 * self.abb as i128;
        // Σ (M² g_j - mean)² · n
        let spread = m1 * g_sq - g_sum * g_sum;
        let m = (n - 1) as f64;
        let nf = n as f64;
        let var = (nf - 1.0) / nf * (spread.max(0) as f64) / (nf * m.powi(4));
        var.sqrt()
    }
}

#[derive(Debug, Clone, PartialEq)]
struct PointAccumulator {
    value: f64,
    shots: u64,
    moments: Vec<Moments>,
}

/// Streaming accumulator with memory proportional to bins × scan points.
#[derive(Debug, Clone)]
pub struct CovarianceAccumulator {
    settings: CovarianceSettings,
    points: BTreeMap<u64, PointAccumulator>,
}

fn key(v: f64) -> u64 {
    // Order-preserving key for finite floats, with -0.0 folded into 0.0.
    let v = if v == 0.0 { 0.0 } else { v };
    let bits = v.to_bits();
    if bits >> 63 == 1 {
        !bits
    } else {
        bits | (1 << 63)
    }
}

impl CovarianceAccumulator {
    pub fn new(settings: CovarianceSettings) -> Self {
        CovarianceAccumulator {
            settings,
            points: BTreeMap::new(),
        }
    }

    pub fn settings(&self) -> &CovarianceSettings {
        &self.settings
    }

    pub fn add_shot(&mut self, shot: &ShotRecord) -> Result<()> {
        let value = self.settings.axis.value(shot);
        if !value.is_finite() {
            return Err(Error::invalid(self.settings.axis.label(), "scan value must be finite"));
        }
        let bins = self.settings.bins();
        let counts = self.settings.shot_counts(&shot.ions);
        let p = self.points.entry(key(value)).or_insert_with(|| PointAccumulator {
            value,
            shots: 0,
            moments: vec![Moments::default(); bins],
        });
        p.shots += 1;
        for (bin, a, b) in counts {
            p.moments[bin].add(a, b);
        }
        Ok(())
    }

    pub fn add_shots(&mut self, shots: &[ShotRecord]) -> Result<()> {
        let partial = shots
            .par_chunks(ACCUMULATION_CHUNK)
            .map(|chunk| {
                let mut acc = CovarianceAccumulator::new(self.settings.clone());
                for s in chunk {
                    acc.add_shot(s)?;
                }
                Ok(acc)
            })
            .reduce(
                || Ok(CovarianceAccumulator::new(self.settings.clone())),
                |a: Result<CovarianceAccumulator>, b| {
                    let mut a = a?;
                    a.merge(&b?);
                    Ok(a)
                },
            )?;
        self.merge(&partial);
        Ok(())
    }

    pub fn merge(&mut self, other: &CovarianceAccumulator) {
        for (k, p) in &other.points {
            match self.points.get_mut(k) {
                Some(q) => {
                    q.shots += p.shots;
                    q.moments.iter_mut().zip(&p.moments).for_each(|(x, y)| x.merge(y));
                }
                None => {
                    self.points.insert(*k, p.clone());
                }
            }
        }
    }

    pub fn finish(&self) -> Result<CovarianceMap> {
        let mut map = CovarianceMap {
            axis: self.settings.axis,
            ker_edges_ev: self.settings.ker_edges_ev.clone(),
            scan_values: Vec::new(),
            shots: Vec::new(),
            cov: Vec::new(),
            sigma: Vec::new(),
        };
        for p in self.points.values() {
            if p.shots < 2 {
                return Err(Error::EmptyScanPoint(p.value));
            }
            map.scan_values.push(p.value);
            map.shots.push(p.shots);
            map.cov.push(p.moments.iter().map(|m| m.covariance(p.shots)).collect());
            map.sigma.push(p.moments.iter().map(|m| m.jackknife_sigma(p.shots)).collect());
        }
        if map.scan_values.is_empty() {
            return Err(Error::ZeroInput("no shots"));
        }
        Ok(map)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceMap {
    pub axis: ScanAxis,
    pub ker_edges_ev: Vec<f64>,
    /// Sorted scan values.
    pub scan_values: Vec<f64>,
    pub shots: Vec<u64>,
    /// `cov[point][bin]`.
    pub cov: Vec<Vec<f64>>,
    pub sigma: Vec<Vec<f64>>,
}

impl CovarianceMap {
    pub fn centers(&self) -> Vec<f64> {
        self.ker_edges_ev.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
    }

    /// Sum over scan points for each KER bin.
    pub fn ker_profile(&self) -> Vec<f64> {
        let bins = self.ker_edges_ev.len() - 1;
        (0..bins).map(|i| self.cov.iter().map(|r| r[i]).sum()).collect()
    }
}

/// Covariance map of an in-memory run.
pub fn covariance_map(shots: &[ShotRecord], settings: &CovarianceSettings) -> Result<CovarianceMap> {
    let mut acc = CovarianceAccumulator::new(settings.clone());
    acc.add_shots(shots)?;
    acc.finish()
}

/// Mean number of candidate A×B pairs per shot in each (scan point, bin).
#[derive(Debug, Clone, PartialEq)]
pub struct CoincidenceMap {
    pub scan_values: Vec<f64>,
    pub ker_edges_ev: Vec<f64>,
    pub shots: Vec<u64>,
    pub counts: Vec<Vec<f64>>,
    /// Mean candidate pairs per shot over the whole run.
    pub pairs_per_shot: f64,
}

impl CoincidenceMap {
    /// Pair counting is only trustworthy below about one pair per shot.
    pub fn is_valid_regime(&self) -> bool {
        self.pairs_per_shot <= 1.0
    }

    pub fn ker_profile(&self) -> Vec<f64> {
        let bins = self.ker_edges_ev.len() - 1;
        (0..bins).map(|i| self.counts.iter().map(|r| r[i]).sum()).collect()
    }
}

/// Direct pair-counting reference, by brute force over every A×B
/// combination in every shot. Without a gate this is the raw coincidence
/// spectrum.
pub fn coincidence_oracle(shots: &[ShotRecord], settings: &CovarianceSettings) -> Result<CoincidenceMap> {
    let bins = settings.bins();
    let mut points: BTreeMap<u64, (f64, u64, Vec<u64>)> = BTreeMap::new();
    let mut total_pairs = 0u64;
    let mut total_shots = 0u64;
    for s in shots {
        let v = settings.axis.value(s);
        let entry = points.entry(key(v)).or_insert_with(|| (v, 0, vec![0; bins]));
        entry.1 += 1;
        total_shots += 1;
        for a in s.ions.iter().filter(|x| x.species == settings.species_a) {
            for b in s.ions.iter().filter(|x| x.species == settings.species_b) {
                if std::ptr::eq(a, b) {
                    continue;
                }
                if let Some(eps) = settings.epsilon {
                    if !momentum_gate(&a.momentum, &b.momentum, eps) {
                        continue;
                    }
                }
                total_pairs += 1;
                if let Some(bin) = settings.bin_of(pair_ker(&a.momentum, &b.momentum, settings.mass_a_au, settings.mass_b_au)) {
                    entry.2[bin] += 1;
                }
            }
        }
    }
    if total_shots == 0 {
        return Err(Error::ZeroInput("no shots"));
    }
    let pairs_per_shot = total_pairs as f64 / total_shots as f64;
    if pairs_per_shot > 1.0 {
        log::warn!("{pairs_per_shot:.2} candidate pairs per shot: coincidence counting is contaminated by false pairs at this rate");
    }
    let mut out = CoincidenceMap {
        scan_values: Vec::new(),
        ker_edges_ev: settings.ker_edges_ev.clone(),
        shots: Vec::new(),
        counts: Vec::new(),
        pairs_per_shot,
    };
    for (v, n, c) in points.into_values() {
        out.scan_values.push(v);
        out.shots.push(n);
        out.counts.push(c.iter().map(|x| *x as f64 / n as f64).collect());
    }
    Ok(out)
}

/// Pearson correlation of two equally long series.
pub fn correlation(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len().min(y.len()) as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    sxy / (sxx * syy).sqrt()
}
