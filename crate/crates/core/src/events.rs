//! Synthetic fragment-ion events for a two-body dication channel, an ideal
//! velocity-map-imaging detector and the event file format.

use std::collections::BTreeSet;
use std::f64::consts::PI;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};
use rayon::prelude::*;

use crate::units::{dalton_to_au, ev_to_hartree, hartree_to_ev, BOLTZMANN_HARTREE_PER_K};
use crate::{Error, Result};

/// Shots generated per independent random stream.
pub const CHUNK_SHOTS: u64 = 4096;

#[derive(Debug, Clone, PartialEq)]
pub struct Species {
    pub id: u32,
    pub name: String,
    pub mass_u: f64,
    pub charge: f64,
}

impl Species {
    pub fn mass_au(&self) -> f64 {
        dalton_to_au(self.mass_u)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpeciesTable {
    species: Vec<Species>,
}

impl SpeciesTable {
    pub fn new(species: Vec<Species>) -> Result<Self> {
        let mut ids = BTreeSet::new();
        for s in &species {
            if !(s.mass_u > 0.0) || !s.mass_u.is_finite() {
                return Err(Error::invalid("species.mass_u", format!("{}: mass must be positive", s.name)));
            }
            if !(s.charge > 0.0) || !s.charge.is_finite() {
                return Err(Error::invalid("species.charge", format!("{}: charge must be positive", s.name)));
            }
            if !ids.insert(s.id) {
                return Err(Error::invalid("species.id", format!("duplicate id {}", s.id)));
            }
        }
        if species.is_empty() {
            return Err(Error::invalid("species", "table is empty"));
        }
        Ok(SpeciesTable { species })
    }

    pub fn get(&self, id: u32) -> Result<&Species> {
        self.species.iter().find(|s| s.id == id).ok_or(Error::UnknownSpecies(id as i64))
    }

    pub fn iter(&self) -> impl Iterator<Item = &Species> {
        self.species.iter()
    }

    pub fn len(&self) -> usize {
        self.species.len()
    }

    pub fn is_empty(&self) -> bool {
        self.species.is_empty()
    }
}

impl Default for SpeciesTable {
    /// CF₃⁺, COCH₃⁺ and CF₂⁺ with masses summed from standard atomic weights.
    fn default() -> Self {
        let s = |id, name: &str, mass_u| Species {
            id,
            name: name.to_string(),
            mass_u,
            charge: 1.0,
        };
        SpeciesTable::new(vec![s(0, "CF3+", 69.006), s(1, "COCH3+", 43.045), s(2, "CF2+", 50.008)]).unwrap()
    }
}

pub type Momentum = [f64; 3];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hit {
    pub x_mm: f64,
    pub y_mm: f64,
    pub t_ns: f64,
}

/// Linear ideal-VMI map `x = cx px`, `y = cy py`, `t = t0(species) + ct pz`.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectorCalibration {
    pub cx_mm_per_au: f64,
    pub cy_mm_per_au: f64,
    pub ct_ns_per_au: f64,
    /// `(species id, t0 in ns)`.
    pub t0_ns: Vec<(u32, f64)>,
}

impl DetectorCalibration {
    pub fn new(cx: f64, cy: f64, ct: f64, t0_ns: Vec<(u32, f64)>) -> Result<Self> {
        for (name, v) in [("detector.cx_mm_per_au", cx), ("detector.cy_mm_per_au", cy), ("detector.ct_ns_per_au", ct)] {
            if v == 0.0 || !v.is_finite() {
                return Err(Error::invalid(name, "must be finite and non-zero"));
            }
        }
        let mut seen = BTreeSet::new();
        for (id, t0) in &t0_ns {
            if !t0.is_finite() || !seen.insert(*id) {
                return Err(Error::invalid("detector.t0", format!("bad or duplicate entry for species {id}")));
            }
        }
        let mut sorted: Vec<f64> = t0_ns.iter().map(|x| x.1).collect();
        sorted.sort_by(f64::total_cmp);
        if sorted.windows(2).any(|w| w[1] - w[0] <= 0.0) {
            return Err(Error::invalid("detector.t0", "time-of-flight offsets must be distinct"));
        }
        Ok(DetectorCalibration {
            cx_mm_per_au: cx,
            cy_mm_per_au: cy,
            ct_ns_per_au: ct,
            t0_ns,
        })
    }

    /// Offsets `t0 = scale · sqrt(m/q)` for every species in the table.
    pub fn with_mass_scaling(cx: f64, cy: f64, ct: f64, tof_scale_ns: f64, table: &SpeciesTable) -> Result<Self> {
        let t0 = table.iter().map(|s| (s.id, tof_scale_ns * (s.mass_u / s.charge).sqrt())).collect();
        Self::new(cx, cy, ct, t0)
    }

    pub fn t0(&self, species: u32) -> Result<f64> {
        self.t0_ns
            .iter()
            .find(|x| x.0 == species)
            .map(|x| x.1)
            .ok_or(Error::UnknownSpecies(species as i64))
    }

    pub fn momentum_to_detector(&self, p: &Momentum, species: u32) -> Result<Hit> {
        Ok(Hit {
            x_mm: self.cx_mm_per_au * p[0],
            y_mm: self.cy_mm_per_au * p[1],
            t_ns: self.t0(species)? + self.ct_ns_per_au * p[2],
        })
    }

    pub fn reconstruct_momentum(&self, hit: &Hit, species: u32) -> Result<Momentum> {
        Ok([
            hit.x_mm / self.cx_mm_per_au,
            hit.y_mm / self.cy_mm_per_au,
            (hit.t_ns - self.t0(species)?) / self.ct_ns_per_au,
        ])
    }

    /// Disjoint time-of-flight windows `(species, lo, hi)` bounded by the
    /// midpoints between neighbouring offsets; the outer windows are as wide
    /// as their inner half.
    pub fn windows(&self) -> Vec<(u32, f64, f64)> {
        let mut s = self.t0_ns.clone();
        s.sort_by(|a, b| a.1.total_cmp(&b.1));
        if s.len() == 1 {
            return vec![(s[0].0, f64::NEG_INFINITY, f64::INFINITY)];
        }
        (0..s.len())
            .map(|i| {
                let lo = if i > 0 { 0.5 * (s[i - 1].1 + s[i].1) } else { s[0].1 - 0.5 * (s[1].1 - s[0].1) };
                let n = s.len();
                let hi = if i + 1 < n { 0.5 * (s[i].1 + s[i + 1].1) } else { s[n - 1].1 + 0.5 * (s[n - 1].1 - s[n - 2].1) };
                (s[i].0, lo, hi)
            })
            .collect()
    }

    pub fn assign_species(&self, t_ns: f64) -> Result<u32> {
        self.windows()
            .into_iter()
            .find(|(_, lo, hi)| t_ns >= *lo && t_ns < *hi)
            .map(|w| w.0)
            .ok_or(Error::UnassignedHit { t_ns })
    }

    /// Full assignment and reconstruction of a raw hit.
    pub fn reconstruct_hit(&self, hit: &Hit) -> Result<(u32, Momentum)> {
        let s = self.assign_species(hit.t_ns)?;
        Ok((s, self.reconstruct_momentum(hit, s)?))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IonEvent {
    pub shot_id: u64,
    pub species: u32,
    pub momentum: Momentum,
    pub hit: Hit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShotRecord {
    pub shot_id: u64,
    pub delay_fs: f64,
    pub phase_rad: f64,
    pub ions: Vec<IonEvent>,
}

/// KER distribution per scan point: shared bin edges (eV) and non-negative
/// weights per bin.
#[derive(Debug, Clone, PartialEq)]
pub struct YieldMap {
    pub ker_edges_ev: Vec<f64>,
    pub points: Vec<ScanPointYield>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanPointYield {
    pub delay_fs: f64,
    pub phase_rad: f64,
    pub weights: Vec<f64>,
}

impl YieldMap {
    pub fn validate(&self) -> Result<()> {
        let e = &self.ker_edges_ev;
        if e.len() < 2 || e.windows(2).any(|w| w[1] <= w[0]) || e[0] < 0.0 {
            return Err(Error::invalid("scan.ker_edges", "KER edges must be non-negative and strictly increasing"));
        }
        if self.points.is_empty() {
            return Err(Error::ZeroInput("yield map has no scan points"));
        }
        for p in &self.points {
            if p.weights.len() + 1 != e.len() {
                return Err(Error::invalid("yield map", "weights do not match the KER bins"));
            }
            if p.weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
                return Err(Error::invalid("yield map", "weights must be finite and non-negative"));
            }
        }
        if self.points.iter().all(|p| p.weights.iter().all(|w| *w == 0.0)) {
            return Err(Error::ZeroInput("yield map"));
        }
        Ok(())
    }

    pub fn total(&self, point: usize) -> f64 {
        self.points[point].weights.iter().sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectorBlur {
    pub sigma_xy_mm: f64,
    pub sigma_t_ns: f64,
}

/// Everything except the yield map needed to generate shots.
#[derive(Debug, Clone, PartialEq)]
pub struct EventModel {
    pub species: SpeciesTable,
    pub calibration: DetectorCalibration,
    pub fragment_a: u32,
    pub fragment_b: u32,
    /// Largest per-shot pair probability; the scan point with the largest
    /// total yield uses it and the others scale with their yield.
    pub pair_probability: f64,
    /// Mean uncorrelated ions per shot, `(species, λ)`.
    pub background_rates: Vec<(u32, f64)>,
    pub temperature_k: f64,
    pub blur: Option<DetectorBlur>,
}

impl EventModel {
    pub fn validate(&self) -> Result<()> {
        self.species.get(self.fragment_a)?;
        self.species.get(self.fragment_b)?;
        if !(0.0..=1.0).contains(&self.pair_probability) {
            return Err(Error::invalid("events.pair_probability", "must be in [0, 1]"));
        }
        for (s, rate) in &self.background_rates {
            self.species.get(*s)?;
            self.calibration.t0(*s)?;
            if !(*rate >= 0.0) || !rate.is_finite() {
                return Err(Error::invalid("events.background_rates", format!("rate {rate} for species {s} is negative")));
            }
        }
        self.calibration.t0(self.fragment_a)?;
        self.calibration.t0(self.fragment_b)?;
        if !(self.temperature_k >= 0.0) || !self.temperature_k.is_finite() {
            return Err(Error::invalid("events.temperature_k", "must be non-negative"));
        }
        if let Some(b) = self.blur {
            if !(b.sigma_xy_mm >= 0.0 && b.sigma_t_ns >= 0.0) {
                return Err(Error::invalid("events.blur", "widths must be non-negative"));
            }
        }
        Ok(())
    }
}

/// Total KER of two fragments (eV), momenta in atomic units.
pub fn pair_ker(pa: &Momentum, pb: &Momentum, mass_a_au: f64, mass_b_au: f64) -> f64 {
    let ka: f64 = pa.iter().map(|x| x * x).sum::<f64>() / (2.0 * mass_a_au);
    let kb: f64 = pb.iter().map(|x| x * x).sum::<f64>() / (2.0 * mass_b_au);
    hartree_to_ev(ka + kb)
}

/// Magnitude of each fragment momentum for a back-to-back break-up.
pub fn pair_momentum(ker_ev: f64, mass_a_au: f64, mass_b_au: f64) -> f64 {
    (2.0 * ev_to_hartree(ker_ev) * mass_a_au * mass_b_au / (mass_a_au + mass_b_au)).sqrt()
}

fn isotropic(rng: &mut impl Rng, magnitude: f64) -> Momentum {
    let cos_t: f64 = rng.random_range(-1.0..=1.0);
    let sin_t = (1.0 - cos_t * cos_t).max(0.0).sqrt();
    let phi: f64 = rng.random_range(0.0..2.0 * PI);
    [magnitude * sin_t * phi.cos(), magnitude * sin_t * phi.sin(), magnitude * cos_t]
}

/// Deterministic, chunked shot generator.
pub struct EventGenerator<'a> {
    model: &'a EventModel,
    map: &'a YieldMap,
    shots_per_point: u64,
    seed: u64,
    pair_probabilities: Vec<f64>,
    cumulative: Vec<Vec<f64>>,
    mass_a: f64,
    mass_b: f64,
}

impl<'a> EventGenerator<'a> {
    pub fn new(model: &'a EventModel, map: &'a YieldMap, shots_per_point: u64, seed: u64) -> Result<Self> {
        model.validate()?;
        map.validate()?;
        let totals: Vec<f64> = (0..map.points.len()).map(|i| map.total(i)).collect();
        let max = totals.iter().cloned().fold(0.0, f64::max);
        let pair_probabilities = totals.iter().map(|t| model.pair_probability * t / max).collect();
        let cumulative = map
            .points
            .iter()
            .map(|p| {
                let mut acc = 0.0;
                p.weights
                    .iter()
                    .map(|w| {
                        acc += w;
                        acc
                    })
                    .collect()
            })
            .collect();
        Ok(EventGenerator {
            model,
            map,
            shots_per_point,
            seed,
            pair_probabilities,
            cumulative,
            mass_a: model.species.get(model.fragment_a)?.mass_au(),
            mass_b: model.species.get(model.fragment_b)?.mass_au(),
        })
    }

    pub fn total_shots(&self) -> u64 {
        self.shots_per_point * self.map.points.len() as u64
    }

    pub fn chunk_count(&self) -> u64 {
        self.total_shots().div_ceil(CHUNK_SHOTS)
    }

    fn stream(&self, chunk: u64, which: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(3 * chunk + which);
        rng
    }

    fn sample_ker(&self, point: usize, rng: &mut impl Rng) -> f64 {
        let cum = &self.cumulative[point];
        let u = rng.random::<f64>() * cum[cum.len() - 1];
        let k = cum.partition_point(|&c| c <= u).min(cum.len() - 1);
        let e = &self.map.ker_edges_ev;
        e[k] + rng.random::<f64>() * (e[k + 1] - e[k])
    }

    fn detect(&self, shot_id: u64, species: u32, p: Momentum, blur_rng: &mut ChaCha8Rng) -> IonEvent {
        let cal = &self.model.calibration;
        let mut hit = cal.momentum_to_detector(&p, species).expect("validated species");
        let momentum = match self.model.blur {
            Some(b) => {
                let g = Normal::new(0.0, 1.0).unwrap();
                hit.x_mm += b.sigma_xy_mm * g.sample(blur_rng);
                hit.y_mm += b.sigma_xy_mm * g.sample(blur_rng);
                hit.t_ns += b.sigma_t_ns * g.sample(blur_rng);
                cal.reconstruct_momentum(&hit, species).expect("validated species")
            }
            None => p,
        };
        IonEvent {
            shot_id,
            species,
            momentum,
            hit,
        }
    }

    /// Shots `[chunk·CHUNK_SHOTS, (chunk+1)·CHUNK_SHOTS)` of the run.
    pub fn chunk(&self, chunk: u64) -> Vec<ShotRecord> {
        let start = chunk * CHUNK_SHOTS;
        let end = (start + CHUNK_SHOTS).min(self.total_shots());
        let mut pair_rng = self.stream(chunk, 0);
        let mut bg_rng = self.stream(chunk, 1);
        let mut blur_rng = self.stream(chunk, 2);
        let poissons: Vec<(u32, Option<Poisson<f64>>)> = self
            .model
            .background_rates
            .iter()
            .map(|(s, l)| (*s, if *l > 0.0 { Some(Poisson::new(*l).unwrap()) } else { None }))
            .collect();
        let kt = BOLTZMANN_HARTREE_PER_K * self.model.temperature_k;
        let mut out = Vec::with_capacity((end - start) as usize);
        for shot_id in start..end {
            let point = (shot_id / self.shots_per_point) as usize;
            let sp = &self.map.points[point];
            let mut ions = Vec::new();
            if pair_rng.random::<f64>() < self.pair_probabilities[point] {
                let ker = self.sample_ker(point, &mut pair_rng);
                let pa = isotropic(&mut pair_rng, pair_momentum(ker, self.mass_a, self.mass_b));
                let pb = [-pa[0], -pa[1], -pa[2]];
                ions.push(self.detect(shot_id, self.model.fragment_a, pa, &mut blur_rng));
                ions.push(self.detect(shot_id, self.model.fragment_b, pb, &mut blur_rng));
            }
            for (s, dist) in &poissons {
                let Some(dist) = dist else { continue };
                let n = dist.sample(&mut bg_rng) as u64;
                let m = self.model.species.get(*s).unwrap().mass_au();
                let sigma = (m * kt).sqrt();
                for _ in 0..n {
                    let p = if sigma > 0.0 {
                        let g = Normal::new(0.0, sigma).unwrap();
                        [g.sample(&mut bg_rng), g.sample(&mut bg_rng), g.sample(&mut bg_rng)]
                    } else {
                        [0.0; 3]
                    };
                    ions.push(self.detect(shot_id, *s, p, &mut blur_rng));
                }
            }
            out.push(ShotRecord {
                shot_id,
                delay_fs: sp.delay_fs,
                phase_rad: sp.phase_rad,
                ions,
            });
        }
        out
    }

    /// Generate every chunk in parallel and hand them to `sink` in order.
    /// At most `batch` chunks are held in memory at once.
    pub fn for_each_chunk(&self, batch: usize, mut sink: impl FnMut(Vec<ShotRecord>) -> Result<()>) -> Result<()> {
        let n = self.chunk_count();
        let batch = batch.max(1) as u64;
        let mut c = 0;
        while c < n {
            let hi = (c + batch).min(n);
            let chunks: Vec<Vec<ShotRecord>> = (c..hi).into_par_iter().map(|k| self.chunk(k)).collect();
            for ch in chunks {
                sink(ch)?;
            }
            c = hi;
        }
        Ok(())
    }
}

/// Generate a whole run in memory.
pub fn sample_pair_events(model: &EventModel, map: &YieldMap, shots_per_point: u64, seed: u64) -> Result<Vec<ShotRecord>> {
    let g = EventGenerator::new(model, map, shots_per_point, seed)?;
    let mut out = Vec::with_capacity(g.total_shots() as usize);
    g.for_each_chunk(rayon::current_num_threads() * 2, |c| {
        out.extend(c);
        Ok(())
    })?;
    Ok(out)
}

pub const EVENT_FORMAT_LINE: &str = "# wpcoh events v1";
pub const EVENT_COLUMNS: [&str; 7] = ["shot_id", "delay_fs", "phase_rad", "species_id", "x_mm", "y_mm", "t_ns"];

/// Streaming writer. Shots without ions are written as a single row with
/// species id -1 and empty hit fields so that they count towards averages.
pub struct EventWriter {
    inner: csv::Writer<BufWriter<File>>,
    last_shot: Option<u64>,
}

impl EventWriter {
    pub fn create(path: &Path, config_hash: &str, species: &SpeciesTable, cal: &DetectorCalibration) -> Result<Self> {
        let mut f = BufWriter::new(File::create(path)?);
        writeln!(f, "{EVENT_FORMAT_LINE}")?;
        writeln!(f, "# config_hash: {config_hash}")?;
        writeln!(
            f,
            "# calibration: cx_mm_per_au={} cy_mm_per_au={} ct_ns_per_au={}",
            cal.cx_mm_per_au, cal.cy_mm_per_au, cal.ct_ns_per_au
        )?;
        for s in species.iter() {
            let t0 = cal.t0(s.id).map(|t| t.to_string()).unwrap_or_else(|_| "none".into());
            writeln!(f, "# species: id={} name={} mass_u={} charge={} t0_ns={}", s.id, s.name, s.mass_u, s.charge, t0)?;
        }
        let mut inner = csv::Writer::from_writer(f);
        inner.write_record(EVENT_COLUMNS)?;
        Ok(EventWriter { inner, last_shot: None })
    }

    pub fn write_shot(&mut self, shot: &ShotRecord) -> Result<()> {
        if let Some(last) = self.last_shot {
            if shot.shot_id <= last {
                return Err(Error::invalid("shot_id", format!("{} does not increase after {last}", shot.shot_id)));
            }
        }
        self.last_shot = Some(shot.shot_id);
        let (id, d, p) = (shot.shot_id.to_string(), shot.delay_fs.to_string(), shot.phase_rad.to_string());
        if shot.ions.is_empty() {
            self.inner.write_record([id.as_str(), &d, &p, "-1", "", "", ""])?;
        }
        for ion in &shot.ions {
            self.inner.write_record([
                id.as_str(),
                &d,
                &p,
                &ion.species.to_string(),
                &ion.hit.x_mm.to_string(),
                &ion.hit.y_mm.to_string(),
                &ion.hit.t_ns.to_string(),
            ])?;
        }
        Ok(())
    }

    pub fn finish(mut self) -> Result<()> {
        self.inner.flush()?;
        Ok(())
    }
}

pub fn write_events(path: &Path, config_hash: &str, species: &SpeciesTable, cal: &DetectorCalibration, shots: &[ShotRecord]) -> Result<()> {
    let mut w = EventWriter::create(path, config_hash, species, cal)?;
    for s in shots {
        w.write_shot(s)?;
    }
    w.finish()
}

/// Streaming reader yielding one shot at a time.
pub struct EventReader {
    path: PathBuf,
    species: SpeciesTable,
    calibration: DetectorCalibration,
    config_hash: String,
    records: csv::StringRecordsIntoIter<BufReader<File>>,
    line: u64,
    pending: Option<(u64, ShotRecord)>,
    last_shot: Option<u64>,
    done: bool,
}

fn parse_kv(s: &str) -> Vec<(&str, &str)> {
    s.split_whitespace().filter_map(|t| t.split_once('=')).collect()
}

impl EventReader {
    pub fn open(path: &Path) -> Result<Self> {
        let malformed = |line: u64, reason: String| Error::Malformed {
            path: path.to_path_buf(),
            line,
            reason,
        };
        let mut reader = BufReader::new(File::open(path)?);
        let (meta, consumed) = crate::io::read_meta(&mut reader)?;
        if meta.first().map(|m| format!("# {m}")) != Some(EVENT_FORMAT_LINE.to_string()) {
            return Err(malformed(1, "not a wpcoh event file".into()));
        }
        let mut hash = String::new();
        let mut cal = None;
        let mut species = Vec::new();
        let mut t0 = Vec::new();
        for (i, m) in meta.iter().enumerate() {
            let line = i as u64 + 1;
            if let Some(h) = m.strip_prefix("config_hash:") {
                hash = h.trim().to_string();
            } else if let Some(c) = m.strip_prefix("calibration:") {
                let kv = parse_kv(c);
                let get = |k: &str| -> Result<f64> {
                    kv.iter()
                        .find(|x| x.0 == k)
                        .and_then(|x| x.1.parse().ok())
                        .ok_or_else(|| malformed(line, format!("calibration lacks {k}")))
                };
                cal = Some((get("cx_mm_per_au")?, get("cy_mm_per_au")?, get("ct_ns_per_au")?));
            } else if let Some(c) = m.strip_prefix("species:") {
                let kv = parse_kv(c);
                let get = |k: &str| kv.iter().find(|x| x.0 == k).map(|x| x.1).ok_or_else(|| malformed(line, format!("species lacks {k}")));
                let num = |k: &str| -> Result<f64> { get(k)?.parse().map_err(|_| malformed(line, format!("bad {k}"))) };
                let id: u32 = get("id")?.parse().map_err(|_| malformed(line, "bad id".into()))?;
                species.push(Species {
                    id,
                    name: get("name")?.to_string(),
                    mass_u: num("mass_u")?,
                    charge: num("charge")?,
                });
                if get("t0_ns")? != "none" {
                    t0.push((id, num("t0_ns")?));
                }
            }
        }
        let (cx, cy, ct) = cal.ok_or_else(|| malformed(consumed, "missing calibration line".into()))?;
        let calibration = DetectorCalibration::new(cx, cy, ct, t0).map_err(|e| malformed(consumed, e.to_string()))?;
        let species = SpeciesTable::new(species).map_err(|e| malformed(consumed, e.to_string()))?;
        let mut csv = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        let header: Vec<String> = csv.headers()?.iter().map(str::to_string).collect();
        if header != EVENT_COLUMNS {
            return Err(malformed(consumed + 1, format!("unexpected columns {header:?}")));
        }
        Ok(EventReader {
            path: path.to_path_buf(),
            species,
            calibration,
            config_hash: hash,
            records: csv.into_records(),
            line: consumed + 1,
            pending: None,
            last_shot: None,
            done: false,
        })
    }

    pub fn species(&self) -> &SpeciesTable {
        &self.species
    }

    pub fn calibration(&self) -> &DetectorCalibration {
        &self.calibration
    }

    pub fn config_hash(&self) -> &str {
        &self.config_hash
    }

    fn err(&self, reason: impl Into<String>) -> Error {
        Error::Malformed {
            path: self.path.clone(),
            line: self.line,
            reason: reason.into(),
        }
    }

    /// Parse one row into `(shot header, optional ion)`.
    fn parse_row(&self, rec: &csv::StringRecord) -> Result<(u64, f64, f64, Option<IonEvent>)> {
        if rec.len() != 7 {
            return Err(self.err(format!("expected 7 fields, got {}", rec.len())));
        }
        let num = |i: usize| -> Result<f64> {
            rec[i]
                .trim()
                .parse::<f64>()
                .map_err(|_| self.err(format!("{}: not a number: {:?}", EVENT_COLUMNS[i], &rec[i])))
        };
        let shot: u64 = rec[0].trim().parse().map_err(|_| self.err("shot_id: not an unsigned integer"))?;
        let (delay, phase) = (num(1)?, num(2)?);
        let sid: i64 = rec[3].trim().parse().map_err(|_| self.err("species_id: not an integer"))?;
        if sid == -1 {
            if !(rec[4].is_empty() && rec[5].is_empty() && rec[6].is_empty()) {
                return Err(self.err("empty-shot row carries hit data"));
            }
            return Ok((shot, delay, phase, None));
        }
        if sid < 0 || sid > u32::MAX as i64 {
            return Err(self.err(format!("unknown species id {sid}")));
        }
        let species = sid as u32;
        self.species.get(species).map_err(|_| self.err(format!("unknown species id {sid}")))?;
        let hit = Hit {
            x_mm: num(4)?,
            y_mm: num(5)?,
            t_ns: num(6)?,
        };
        let momentum = self.calibration.reconstruct_momentum(&hit, species).map_err(|e| self.err(e.to_string()))?;
        Ok((
            shot,
            delay,
            phase,
            Some(IonEvent {
                shot_id: shot,
                species,
                momentum,
                hit,
            }),
        ))
    }

    fn next_shot(&mut self) -> Result<Option<ShotRecord>> {
        if self.done {
            return Ok(None);
        }
        loop {
            let Some(rec) = self.records.next() else {
                self.done = true;
                return Ok(self.pending.take().map(|p| p.1));
            };
            self.line += 1;
            let rec = rec.map_err(|e| self.err(e.to_string()))?;
            let (shot, delay, phase, ion) = self.parse_row(&rec)?;
            match &mut self.pending {
                Some((id, s)) if *id == shot => {
                    if s.ions.is_empty() || ion.is_none() {
                        return Err(self.err("empty-shot marker mixed with ions"));
                    }
                    if s.delay_fs != delay || s.phase_rad != phase {
                        return Err(self.err("scan values change within a shot"));
                    }
                    s.ions.extend(ion);
                }
                _ => {
                    if let Some(last) = self.last_shot {
                        if shot <= last {
                            return Err(self.err(format!("shot_id {shot} does not increase after {last}")));
                        }
                    }
                    self.last_shot = Some(shot);
                    let new = ShotRecord {
                        shot_id: shot,
                        delay_fs: delay,
                        phase_rad: phase,
                        ions: ion.into_iter().collect(),
                    };
                    if let Some((_, done)) = self.pending.replace((shot, new)) {
                        return Ok(Some(done));
                    }
                }
            }
        }
    }
}

impl Iterator for EventReader {
    type Item = Result<ShotRecord>;

    fn next(&mut self) -> Option<Self::Item> {
        match self.next_shot() {
            Ok(Some(s)) => Some(Ok(s)),
            Ok(None) => None,
            Err(e) => {
                self.done = true;
                Some(Err(e))
            }
        }
    }
}

pub fn read_events(path: &Path) -> Result<Vec<ShotRecord>> {
    EventReader::open(path)?.collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn calibration() -> DetectorCalibration {
        DetectorCalibration::with_mass_scaling(0.25, 0.25, -0.5, 1000.0, &SpeciesTable::default()).unwrap()
    }

    fn model(pair_probability: f64, rates: Vec<(u32, f64)>) -> EventModel {
        EventModel {
            species: SpeciesTable::default(),
            calibration: calibration(),
            fragment_a: 0,
            fragment_b: 1,
            pair_probability,
            background_rates: rates,
            temperature_k: 300.0,
            blur: None,
        }
    }

    fn map(points: usize) -> YieldMap {
        let edges: Vec<f64> = (0..=20).map(|k| 1.0 + 0.5 * k as f64).collect();
        YieldMap {
            points: (0..points)
                .map(|i| ScanPointYield {
                    delay_fs: 2.0 * i as f64,
                    phase_rad: 0.0,
                    weights: (0..20).map(|k| ((k as f64 - 8.0) / 3.0).powi(2).neg_exp()).collect(),
                })
                .collect(),
            ker_edges_ev: edges,
        }
    }

    trait NegExp {
        fn neg_exp(self) -> f64;
    }
    impl NegExp for f64 {
        fn neg_exp(self) -> f64 {
            (-self).exp()
        }
    }

    #[test]
    fn ker_of_50_au_back_to_back() {
        let (ma, mb) = (dalton_to_au(69.0), dalton_to_au(43.0));
        let k = pair_ker(&[50.0, 0.0, 0.0], &[-50.0, 0.0, 0.0], ma, mb);
        // oracle: p^2 (mA + mB) / (2 mA mB) with p in kg m/s and u in kg
        let p_si = 50.0 * 1.992_851_914_10e-24;
        let u = 1.660_539_066_60e-27;
        let oracle = p_si * p_si * (112.0 * u) / (2.0 * 69.0 * u * 43.0 * u) / 1.602_176_634e-19;
        assert!((k - oracle).abs() < 1e-6, "{k} vs {oracle}");
        assert!((k - 0.704).abs() < 0.001);
        assert_eq!(pair_ker(&[0.0; 3], &[0.0; 3], ma, mb), 0.0);
        let p = pair_momentum(k, ma, mb);
        assert!((p - 50.0).abs() < 1e-9);
    }

    #[test]
    fn detector_round_trip_and_windows() {
        let cal = calibration();
        let h = cal.momentum_to_detector(&[0.0; 3], 1).unwrap();
        assert_eq!((h.x_mm, h.y_mm, h.t_ns), (0.0, 0.0, cal.t0(1).unwrap()));
        let p = [12.5, -40.0, 33.3];
        let ha = cal.momentum_to_detector(&p, 0).unwrap();
        let hb = cal.momentum_to_detector(&p, 1).unwrap();
        assert_eq!(ha.t_ns - hb.t_ns, cal.t0(0).unwrap() - cal.t0(1).unwrap());
        let back = cal.reconstruct_momentum(&ha, 0).unwrap();
        assert!(back.iter().zip(&p).all(|(a, b)| (a - b).abs() < 1e-12));
        assert_eq!(cal.reconstruct_hit(&ha).unwrap().0, 0);
        assert_eq!(cal.reconstruct_hit(&hb).unwrap().0, 1);
        assert!(matches!(cal.assign_species(1.0), Err(Error::UnassignedHit { .. })));
        assert!(matches!(cal.t0(9), Err(Error::UnknownSpecies(9))));
        assert!(DetectorCalibration::new(0.0, 1.0, 1.0, vec![(0, 1.0)]).is_err());
    }

    #[test]
    fn pure_pairs_conserve_momentum() {
        let m = model(1.0, vec![]);
        let shots = sample_pair_events(&m, &map(2), 500, 7).unwrap();
        assert_eq!(shots.len(), 1000);
        for s in &shots {
            assert_eq!(s.ions.len(), 2);
            let (a, b) = (&s.ions[0], &s.ions[1]);
            for k in 0..3 {
                assert_eq!(a.momentum[k] + b.momentum[k], 0.0);
            }
            let ra = m.calibration.reconstruct_momentum(&a.hit, a.species).unwrap();
            let rb = m.calibration.reconstruct_momentum(&b.hit, b.species).unwrap();
            assert!((0..3).all(|k| (ra[k] + rb[k]).abs() < 1e-9));
        }
    }

    #[test]
    fn mean_hits_per_shot() {
        let m = model(0.5, vec![(0, 4.0), (1, 4.0)]);
        let shots = sample_pair_events(&m, &map(1), 20000, 3).unwrap();
        let mean = shots.iter().map(|s| s.ions.len()).sum::<usize>() as f64 / shots.len() as f64;
        assert!((mean - 9.0).abs() < 0.1, "{mean}");
        assert!((5.0..=10.0).contains(&mean));
    }

    #[test]
    fn generation_is_deterministic_and_chunked() {
        let m = model(0.3, vec![(0, 1.0), (2, 0.5)]);
        let a = sample_pair_events(&m, &map(3), 3000, 11).unwrap();
        let b = sample_pair_events(&m, &map(3), 3000, 11).unwrap();
        assert_eq!(a, b);
        let c = sample_pair_events(&m, &map(3), 3000, 12).unwrap();
        assert_ne!(a, c);
        let y = map(3);
        let g = EventGenerator::new(&m, &y, 3000, 11).unwrap();
        let mut serial = Vec::new();
        g.for_each_chunk(1, |c| {
            serial.extend(c);
            Ok(())
        })
        .unwrap();
        assert_eq!(a, serial);
        assert!(a.windows(2).all(|w| w[1].shot_id == w[0].shot_id + 1));
    }

    #[test]
    fn pair_probability_follows_total_yield() {
        let mut y = map(2);
        y.points[1].weights.iter_mut().for_each(|w| *w *= 0.25);
        let m = model(0.8, vec![]);
        let shots = sample_pair_events(&m, &y, 20000, 5).unwrap();
        let frac = |d: f64| {
            let s: Vec<_> = shots.iter().filter(|s| s.delay_fs == d).collect();
            s.iter().filter(|s| !s.ions.is_empty()).count() as f64 / s.len() as f64
        };
        assert!((frac(0.0) - 0.8).abs() < 0.015);
        assert!((frac(2.0) - 0.2).abs() < 0.015);
    }

    #[test]
    fn invalid_inputs() {
        let mut zero = map(1);
        zero.points[0].weights.iter_mut().for_each(|w| *w = 0.0);
        assert!(matches!(sample_pair_events(&model(0.5, vec![]), &zero, 10, 1), Err(Error::ZeroInput(_))));
        assert!(sample_pair_events(&model(0.5, vec![(0, -1.0)]), &map(1), 10, 1).is_err());
        assert!(sample_pair_events(&model(1.5, vec![]), &map(1), 10, 1).is_err());
        assert!(matches!(
            sample_pair_events(&model(0.5, vec![(7, 1.0)]), &map(1), 10, 1),
            Err(Error::UnknownSpecies(7))
        ));
    }

    #[test]
    fn event_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("events.csv");
        let m = EventModel {
            blur: Some(DetectorBlur {
                sigma_xy_mm: 0.05,
                sigma_t_ns: 0.1,
            }),
            ..model(0.4, vec![(0, 0.7), (1, 0.7), (2, 0.3)])
        };
        let shots = sample_pair_events(&m, &map(2), 5000, 9).unwrap();
        assert!(shots.iter().any(|s| s.ions.is_empty()));
        write_events(&path, "abc", &m.species, &m.calibration, &shots).unwrap();
        let reader = EventReader::open(&path).unwrap();
        assert_eq!(reader.config_hash(), "abc");
        assert_eq!(reader.species(), &m.species);
        assert_eq!(reader.calibration(), &m.calibration);
        let back: Vec<ShotRecord> = reader.collect::<Result<_>>().unwrap();
        assert_eq!(back.len(), shots.len());
        for (a, b) in shots.iter().zip(&back) {
            assert_eq!((a.shot_id, a.delay_fs, a.phase_rad), (b.shot_id, b.delay_fs, b.phase_rad));
            assert_eq!(a.ions.len(), b.ions.len());
            for (x, y) in a.ions.iter().zip(&b.ions) {
                assert_eq!((x.species, x.hit), (y.species, y.hit));
                assert!((0..3).all(|k| (x.momentum[k] - y.momentum[k]).abs() < 1e-9));
            }
        }
    }

    #[test]
    fn empty_run_is_header_only() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("empty.csv");
        let m = model(0.0, vec![]);
        write_events(&path, "h", &m.species, &m.calibration, &[]).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().last().unwrap(), EVENT_COLUMNS.join(","));
        assert!(read_events(&path).unwrap().is_empty());
    }

    #[test]
    fn malformed_rows_are_rejected_with_line_numbers() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("e.csv");
        let m = model(1.0, vec![]);
        let shots = sample_pair_events(&m, &map(1), 3, 1).unwrap();
        write_events(&path, "h", &m.species, &m.calibration, &shots).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        let header_line = lines.iter().position(|l| l.starts_with("shot_id")).unwrap();
        for (bad, reason) in [("0,0,0,9,1,1,1", "species"), ("0,0,0,0,x,1,1", "number"), ("0,0,0", "fields")] {
            let mut l = lines.clone();
            l[header_line + 2] = bad;
            std::fs::write(&path, l.join("\n")).unwrap();
            match read_events(&path) {
                Err(Error::Malformed { line, reason: r, .. }) => {
                    assert_eq!(line as usize, header_line + 3, "{r}");
                    assert!(r.contains(reason) || reason == "fields", "{r}");
                }
                other => panic!("{other:?}"),
            }
        }
    }

    proptest! {
        #[test]
        fn forward_inverse_round_trip(px in -300.0f64..300.0, py in -300.0f64..300.0, pz in -300.0f64..300.0, s in 0u32..3) {
            let cal = calibration();
            let p = [px, py, pz];
            let h = cal.momentum_to_detector(&p, s).unwrap();
            let (sid, q) = cal.reconstruct_hit(&h).unwrap();
            prop_assert_eq!(sid, s);
            for k in 0..3 {
                prop_assert!((p[k] - q[k]).abs() <= 1e-12 * (1.0 + p[k].abs()));
            }
        }
    }
}
