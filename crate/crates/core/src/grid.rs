use std::f64::consts::PI;

use crate::{Error, Result};

/// Uniform periodic grid on `[r_min, r_max)` with a power-of-two point count.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpatialGrid {
    r_min: f64,
    r_max: f64,
    n: usize,
}

impl SpatialGrid {
    pub fn new(r_min: f64, r_max: f64, n: usize) -> Result<Self> {
        if n < 2 || !n.is_power_of_two() {
            return Err(Error::invalid("grid.points", format!("{n} is not a power of two >= 2")));
        }
        if !(r_min.is_finite() && r_max.is_finite()) || r_max <= r_min {
            return Err(Error::invalid("grid.r_max_bohr", format!("need r_max > r_min, got [{r_min}, {r_max}]")));
        }
        Ok(SpatialGrid { r_min, r_max, n })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn r_min(&self) -> f64 {
        self.r_min
    }

    pub fn r_max(&self) -> f64 {
        self.r_max
    }

    pub fn dr(&self) -> f64 {
        (self.r_max - self.r_min) / self.n as f64
    }

    pub fn r(&self, j: usize) -> f64 {
        self.r_min + j as f64 * self.dr()
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.n).map(|j| self.r(j)).collect()
    }

    pub fn contains(&self, r: f64) -> bool {
        r >= self.r_min && r < self.r_max
    }

    pub fn dk(&self) -> f64 {
        2.0 * PI / (self.n as f64 * self.dr())
    }

    /// Conjugate momenta in FFT order.
    pub fn momenta(&self) -> Vec<f64> {
        let n = self.n as i64;
        let dk = self.dk();
        (0..n)
            .map(|j| if j < n / 2 { j } else { j - n })
            .map(|j| j as f64 * dk)
            .collect()
    }

    pub fn index_of(&self, r: f64) -> Option<usize> {
        if !self.contains(r) {
            return None;
        }
        Some((((r - self.r_min) / self.dr()).round() as usize).min(self.n - 1))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_sizes() {
        assert!(SpatialGrid::new(0.0, 1.0, 1000).is_err());
        assert!(SpatialGrid::new(0.0, 1.0, 1).is_err());
        assert!(SpatialGrid::new(1.0, 1.0, 64).is_err());
    }

    #[test]
    fn momentum_spacing() {
        let g = SpatialGrid::new(1.0, 60.0, 2048).unwrap();
        let k = g.momenta();
        assert!((k[1] - k[0] - 2.0 * PI / (2048.0 * g.dr())).abs() < 1e-15);
        assert_eq!(k[1024], -1024.0 * g.dk());
    }
}
