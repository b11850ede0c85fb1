//! Spline-defined dissociative potential curves.
//!
//! A curve is a natural cubic spline through at least four `(R, V)` control
//! points (bohr, hartree). Left of the first point the spline continues along
//! its end tangent (the natural end condition makes that extension C²); right
//! of the last point the curve is flat at the last control value.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::grid::SpatialGrid;
use crate::{Error, Result};

pub const MIN_CONTROL_POINTS: usize = 4;

#[derive(Debug, Clone, PartialEq)]
pub struct PotentialCurve {
    r: Vec<f64>,
    v: Vec<f64>,
    /// Second derivatives at the knots.
    m: Vec<f64>,
}

impl PotentialCurve {
    /// Natural cubic spline through `points`.
    pub fn from_control_points(points: &[(f64, f64)]) -> Result<Self> {
        if points.len() < MIN_CONTROL_POINTS {
            return Err(Error::invalid(
                "potential.control_points",
                format!("need at least {MIN_CONTROL_POINTS} points, got {}", points.len()),
            ));
        }
        if points.iter().any(|(r, v)| !r.is_finite() || !v.is_finite()) {
            return Err(Error::invalid("potential.control_points", "non-finite value"));
        }
        if points.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(Error::invalid("potential.control_points", "R values must be strictly increasing"));
        }
        let r: Vec<f64> = points.iter().map(|p| p.0).collect();
        let v: Vec<f64> = points.iter().map(|p| p.1).collect();
        let m = natural_second_derivatives(&r, &v);
        Ok(PotentialCurve { r, v, m })
    }

    pub fn control_points(&self) -> Vec<(f64, f64)> {
        self.r.iter().copied().zip(self.v.iter().copied()).collect()
    }

    pub fn asymptote(&self) -> f64 {
        *self.v.last().unwrap()
    }

    pub fn eval(&self, x: f64) -> f64 {
        let n = self.r.len();
        if x >= self.r[n - 1] {
            return self.v[n - 1];
        }
        if x <= self.r[0] {
            return self.v[0] + self.end_slope() * (x - self.r[0]);
        }
        let i = self.segment(x);
        let h = self.r[i + 1] - self.r[i];
        let a = (self.r[i + 1] - x) / h;
        let b = (x - self.r[i]) / h;
        a * self.v[i]
            + b * self.v[i + 1]
            + ((a * a * a - a) * self.m[i] + (b * b * b - b) * self.m[i + 1]) * h * h / 6.0
    }

    pub fn derivative(&self, x: f64) -> f64 {
        let n = self.r.len();
        if x >= self.r[n - 1] {
            return 0.0;
        }
        if x <= self.r[0] {
            return self.end_slope();
        }
        let i = self.segment(x);
        let h = self.r[i + 1] - self.r[i];
        let a = (self.r[i + 1] - x) / h;
        let b = (x - self.r[i]) / h;
        (self.v[i + 1] - self.v[i]) / h
            + ((1.0 - 3.0 * a * a) * self.m[i] + (3.0 * b * b - 1.0) * self.m[i + 1]) * h / 6.0
    }

    pub fn second_derivative(&self, x: f64) -> f64 {
        let n = self.r.len();
        if x >= self.r[n - 1] || x <= self.r[0] {
            return 0.0;
        }
        let i = self.segment(x);
        let h = self.r[i + 1] - self.r[i];
        let a = (self.r[i + 1] - x) / h;
        let b = (x - self.r[i]) / h;
        a * self.m[i] + b * self.m[i + 1]
    }

    /// Slope of the left linear extension.
    fn end_slope(&self) -> f64 {
        let h = self.r[1] - self.r[0];
        (self.v[1] - self.v[0]) / h - h * (2.0 * self.m[0] + self.m[1]) / 6.0
    }

    fn segment(&self, x: f64) -> usize {
        let n = self.r.len();
        match self.r.partition_point(|&k| k <= x) {
            0 => 0,
            p => (p - 1).min(n - 2),
        }
    }

    pub fn sample(&self, grid: &SpatialGrid) -> Vec<f64> {
        grid.points().into_iter().map(|r| self.eval(r)).collect()
    }

    /// Interior stationary points between the first and last control points,
    /// located by sign changes of the derivative on a fine sampling.
    pub fn stationary_points(&self) -> (Vec<f64>, Vec<f64>) {
        let (lo, hi) = (self.r[0], *self.r.last().unwrap());
        let steps = 4000;
        let dx = (hi - lo) / steps as f64;
        let mut minima = Vec::new();
        let mut maxima = Vec::new();
        let mut prev = self.derivative(lo + 0.5 * dx);
        for s in 1..steps {
            let x = lo + (s as f64 + 0.5) * dx;
            let d = self.derivative(x);
            if prev < 0.0 && d >= 0.0 {
                minima.push(x);
            } else if prev > 0.0 && d <= 0.0 {
                maxima.push(x);
            }
            prev = d;
        }
        (minima, maxima)
    }

    /// Multiply every control value except the first by an independent factor
    /// drawn uniformly from `[1 - fraction, 1 + fraction]`.
    pub fn perturbed(&self, seed: u64, fraction: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&fraction) {
            return Err(Error::invalid("potential.perturb_fraction", format!("{fraction} not in [0, 1)")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut points = self.control_points();
        for p in points.iter_mut().skip(1) {
            let u: f64 = rng.random_range(-1.0..=1.0);
            p.1 *= 1.0 + fraction * u;
        }
        if fraction == 0.0 {
            return Ok(self.clone());
        }
        PotentialCurve::from_control_points(&points)
    }

    pub fn scaled(&self, factor: f64) -> Self {
        let points: Vec<_> = self.control_points().into_iter().map(|(r, v)| (r, v * factor)).collect();
        PotentialCurve::from_control_points(&points).expect("scaling preserves validity")
    }
}

/// Solve the tridiagonal system for natural-spline second derivatives.
fn natural_second_derivatives(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    let mut m = vec![0.0; n];
    let inner = n - 2;
    let mut diag = vec![0.0; inner];
    let mut upper = vec![0.0; inner];
    let mut rhs = vec![0.0; inner];
    for k in 0..inner {
        let i = k + 1;
        let h0 = x[i] - x[i - 1];
        let h1 = x[i + 1] - x[i];
        diag[k] = (h0 + h1) / 3.0;
        upper[k] = h1 / 6.0;
        rhs[k] = (y[i + 1] - y[i]) / h1 - (y[i] - y[i - 1]) / h0;
    }
    // Thomas algorithm; the sub-diagonal equals the previous row's upper entry.
    for k in 1..inner {
        let w = upper[k - 1] / diag[k - 1];
        diag[k] -= w * upper[k - 1];
        rhs[k] -= w * rhs[k - 1];
    }
    for k in (0..inner).rev() {
        let next = if k + 1 < inner { m[k + 2] } else { 0.0 };
        m[k + 1] = (rhs[k] - upper[k] * next) / diag[k];
    }
    m
}

/// Two nearly parallel curves. State 2 sits `offset` (nominally one photon
/// energy) above its own curve.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialPair {
    pub lower: PotentialCurve,
    pub upper: PotentialCurve,
    pub offset: f64,
}

impl PotentialPair {
    pub fn new(lower: PotentialCurve, upper: PotentialCurve, offset: f64) -> Result<Self> {
        if !offset.is_finite() {
            return Err(Error::invalid("potential.offset_ev", "offset must be finite"));
        }
        Ok(PotentialPair { lower, upper, offset })
    }

    /// Upper curve obtained by scaling the lower curve's control values.
    pub fn scaled(lower: PotentialCurve, upper_scale: f64, offset: f64) -> Result<Self> {
        let upper = lower.scaled(upper_scale);
        Self::new(lower, upper, offset)
    }

    pub fn v1(&self, r: f64) -> f64 {
        self.lower.eval(r)
    }

    pub fn v2(&self, r: f64) -> f64 {
        self.upper.eval(r) + self.offset
    }

    /// Both curves perturbed with the same seed, so corresponding control
    /// points move by the same factor and the pair stays nearly parallel.
    pub fn perturbed(&self, seed: u64, fraction: f64) -> Result<Self> {
        Ok(PotentialPair {
            lower: self.lower.perturbed(seed, fraction)?,
            upper: self.upper.perturbed(seed, fraction)?,
            offset: self.offset,
        })
    }
}

/// Coulomb repulsion energy (hartree) of two unit charges at distance `r` (bohr).
pub fn coulomb_energy(r: f64) -> Result<f64> {
    if !(r > 0.0) || !r.is_finite() {
        return Err(Error::invalid("distance", format!("{r} must be positive")));
    }
    Ok(1.0 / r)
}

/// Inverse of [`coulomb_energy`].
pub fn coulomb_distance(e: f64) -> Result<f64> {
    if !(e > 0.0) || !e.is_finite() {
        return Err(Error::invalid("energy", format!("{e} must be positive")));
    }
    Ok(1.0 / e)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::units::ev_to_hartree;
    use proptest::prelude::*;

    fn model_points() -> Vec<(f64, f64)> {
        vec![
            (2.4, 0.0),
            (3.0, ev_to_hartree(-0.9)),
            (3.8, ev_to_hartree(-0.6)),
            (4.6, ev_to_hartree(-2.5)),
        ]
    }

    #[test]
    fn passes_through_control_points() {
        let c = PotentialCurve::from_control_points(&model_points()).unwrap();
        for (r, v) in model_points() {
            assert!((c.eval(r) - v).abs() <= 1e-12);
        }
    }

    #[test]
    fn one_well_and_one_barrier() {
        let c = PotentialCurve::from_control_points(&model_points()).unwrap();
        let (minima, maxima) = c.stationary_points();
        assert_eq!(minima.len(), 1, "{minima:?}");
        assert_eq!(maxima.len(), 1, "{maxima:?}");
        assert!(minima[0] < maxima[0]);
    }

    #[test]
    fn flat_input_gives_flat_curve() {
        let pts: Vec<_> = (0..5).map(|i| (1.0 + i as f64, -0.3)).collect();
        let c = PotentialCurve::from_control_points(&pts).unwrap();
        for x in [0.0, 1.3, 2.7, 4.9, 9.0] {
            assert!((c.eval(x) + 0.3).abs() < 1e-15);
        }
    }

    #[test]
    fn flat_beyond_last_point() {
        let c = PotentialCurve::from_control_points(&model_points()).unwrap();
        assert_eq!(c.eval(10.0), c.asymptote());
        assert_eq!(c.eval(4.6), c.asymptote());
    }

    #[test]
    fn smooth_inside_control_span_and_left_extension() {
        let c = PotentialCurve::from_control_points(&model_points()).unwrap();
        // value, slope and curvature are continuous at the interior knots and at the first knot
        for &k in &[2.4, 3.0, 3.8] {
            let e = 1e-9;
            assert!((c.eval(k - e) - c.eval(k + e)).abs() < 1e-9);
            assert!((c.derivative(k - e) - c.derivative(k + e)).abs() < 1e-7);
            assert!((c.second_derivative(k - e) - c.second_derivative(k + e)).abs() < 1e-6);
        }
    }

    #[test]
    fn rejects_bad_input() {
        assert!(PotentialCurve::from_control_points(&model_points()[..3]).is_err());
        let mut p = model_points();
        p.swap(1, 2);
        assert!(PotentialCurve::from_control_points(&p).is_err());
        let c = PotentialCurve::from_control_points(&model_points()).unwrap();
        assert!(c.perturbed(1, 1.0).is_err());
        assert!(c.perturbed(1, -0.1).is_err());
    }

    #[test]
    fn zero_perturbation_is_identity() {
        let c = PotentialCurve::from_control_points(&model_points()).unwrap();
        assert_eq!(c.perturbed(99, 0.0).unwrap(), c);
    }

    #[test]
    fn perturbation_is_deterministic() {
        let c = PotentialCurve::from_control_points(&model_points()).unwrap();
        let a = c.perturbed(5, 0.05).unwrap();
        let b = c.perturbed(5, 0.05).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c.perturbed(6, 0.05).unwrap());
    }

    #[test]
    fn ensemble_keeps_feature_ordering() {
        let c = PotentialCurve::from_control_points(&model_points()).unwrap();
        for seed in 0..100 {
            let p = c.perturbed(seed, 0.05).unwrap();
            let v: Vec<f64> = p.control_points().iter().map(|x| x.1).collect();
            // roll-down into the well, barrier above the well, roll-down below the barrier
            assert!(v[1] < v[0] && v[2] > v[1] && v[3] < v[2], "seed {seed}: {v:?}");
            let (minima, maxima) = p.stationary_points();
            assert_eq!((minima.len(), maxima.len()), (1, 1), "seed {seed}");
            assert!(minima[0] < maxima[0]);
        }
    }

    #[test]
    fn coulomb_identities() {
        assert_eq!(coulomb_energy(1.0).unwrap(), 1.0);
        assert!(coulomb_energy(0.0).is_err());
        assert!(coulomb_distance(-1.0).is_err());
        // 1 Å from SI constants: e / (4 pi eps0 * 1e-10 m) in volts
        let e = 1.602_176_634e-19;
        let k = 8.987_551_792_3e9;
        let oracle_ev = k * e / 1e-10;
        let au = coulomb_energy(crate::units::angstrom_to_bohr(1.0)).unwrap();
        let ev = crate::units::hartree_to_ev(au);
        assert!((ev - oracle_ev).abs() < 1e-6, "{ev} vs {oracle_ev}");
        assert!((ev - 14.40).abs() < 0.005);
    }

    proptest! {
        #[test]
        fn perturbation_is_bounded(seed in any::<u64>(), f in 0.0f64..0.99) {
            let c = PotentialCurve::from_control_points(&model_points()).unwrap();
            let p = c.perturbed(seed, f).unwrap();
            let (a, b) = (c.control_points(), p.control_points());
            prop_assert_eq!(a[0], b[0]);
            for (x, y) in a.iter().zip(&b) {
                prop_assert!((x.1 - y.1).abs() <= f * x.1.abs() * (1.0 + 1e-12));
            }
        }

        #[test]
        fn coulomb_round_trip(e in 1e-6f64..1e6) {
            let back = coulomb_energy(coulomb_distance(e).unwrap()).unwrap();
            prop_assert!(((back - e) / e).abs() < 1e-12);
        }
    }
}
