use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Uniform collocation grid on the torus `[0, 2π)^d`, `d ∈ {1, 2}`.
///
/// Two-dimensional samples are stored row-major with `x1` as the slow
/// index: `values[i1 * n + i2] = f(2π i1 / n, 2π i2 / n)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PeriodicGrid {
    dim: usize,
    n: usize,
}

impl PeriodicGrid {
    pub fn new(dim: usize, n: usize) -> Result<Self> {
        if dim != 1 && dim != 2 {
            return Err(Error::InvalidGrid(format!("dimension {dim} not in {{1, 2}}")));
        }
        if n < 8 || !n.is_power_of_two() {
            return Err(Error::InvalidGrid(format!(
                "n = {n} must be a power of two and at least 8"
            )));
        }
        Ok(Self { dim, n })
    }

    pub fn one_d(n: usize) -> Result<Self> {
        Self::new(1, n)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Points per axis.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Total number of samples, `n^d`.
    pub fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self) -> f64 {
        2.0 * PI / self.n as f64
    }

    /// Integer wavenumber for an FFT bin along one axis, in `[-n/2, n/2)`.
    pub fn axis_wavenumber(&self, bin: usize) -> i64 {
        let half = (self.n / 2) as i64;
        let b = bin as i64;
        if b < half {
            b
        } else {
            b - self.n as i64
        }
    }

    /// FFT bin holding wavenumber `k` along one axis (wrapping).
    pub fn axis_bin(&self, k: i64) -> usize {
        k.rem_euclid(self.n as i64) as usize
    }

    /// Wavevector `(k1, k2)` of a flattened spectral index; `k2 = 0` in 1-D.
    pub fn wavevector(&self, idx: usize) -> [i64; 2] {
        match self.dim {
            1 => [self.axis_wavenumber(idx), 0],
            _ => [
                self.axis_wavenumber(idx / self.n),
                self.axis_wavenumber(idx % self.n),
            ],
        }
    }

    /// Flattened spectral index of a wavevector (components wrap modulo `n`).
    pub fn index_of(&self, k: [i64; 2]) -> usize {
        match self.dim {
            1 => self.axis_bin(k[0]),
            _ => self.axis_bin(k[0]) * self.n + self.axis_bin(k[1]),
        }
    }

    /// Index of the mode `-k`.
    pub fn conjugate_index(&self, idx: usize) -> usize {
        let k = self.wavevector(idx);
        self.index_of([-k[0], -k[1]])
    }

    /// `|k|²` of a flattened spectral index, as an exact integer.
    pub fn wavenumber_sq(&self, idx: usize) -> u64 {
        let k = self.wavevector(idx);
        (k[0] * k[0] + k[1] * k[1]) as u64
    }

    /// Whether any component of the mode sits on the Nyquist bin `-n/2`.
    pub fn is_nyquist(&self, idx: usize) -> bool {
        let k = self.wavevector(idx);
        let ny = -((self.n / 2) as i64);
        k[0] == ny || (self.dim == 2 && k[1] == ny)
    }

    /// Physical coordinates of a flattened sample index; `x2 = 0` in 1-D.
    pub fn point(&self, idx: usize) -> [f64; 2] {
        let h = self.spacing();
        match self.dim {
            1 => [idx as f64 * h, 0.0],
            _ => [(idx / self.n) as f64 * h, (idx % self.n) as f64 * h],
        }
    }

    /// Samples `f` on the grid.
    pub fn sample(&self, f: impl Fn([f64; 2]) -> f64) -> Vec<f64> {
        (0..self.len()).map(|i| f(self.point(i))).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_sizes() {
        assert!(PeriodicGrid::new(1, 4).is_err());
        assert!(PeriodicGrid::new(1, 12).is_err());
        assert!(PeriodicGrid::new(3, 16).is_err());
        assert!(PeriodicGrid::new(2, 16).is_ok());
    }

    #[test]
    fn wavenumbers_cover_half_open_range() {
        let g = PeriodicGrid::one_d(16).unwrap();
        let ks: Vec<i64> = (0..16).map(|b| g.axis_wavenumber(b)).collect();
        assert_eq!(*ks.iter().min().unwrap(), -8);
        assert_eq!(*ks.iter().max().unwrap(), 7);
        for b in 0..16 {
            assert_eq!(g.axis_bin(g.axis_wavenumber(b)), b);
        }
    }

    #[test]
    fn two_d_indexing_round_trips() {
        let g = PeriodicGrid::new(2, 8).unwrap();
        for idx in 0..g.len() {
            assert_eq!(g.index_of(g.wavevector(idx)), idx);
            let c = g.conjugate_index(idx);
            assert_eq!(g.conjugate_index(c), idx);
        }
    }
}
