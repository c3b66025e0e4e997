use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::ops::{Add, Mul, Neg, Sub};

use super::fft::Transformer;
use super::grid::PeriodicGrid;
use crate::error::{Error, Result};

/// Highest total derivative order accepted by [`SurfaceField::derivative`].
pub const MAX_DERIVATIVE_ORDER: usize = 6;

/// Relative size of the zero mode below which a field counts as mean-zero.
const MEAN_ZERO_TOL: f64 = 1e-12;

/// Truncation rule for products.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DealiasRule {
    /// Zero every mode with some `|k_j| > n/3`.
    #[default]
    TwoThirds,
    None,
}

impl DealiasRule {
    /// Whether a wavevector survives the rule on an `n`-point axis.
    pub fn keeps(self, k: [i64; 2], n: usize) -> bool {
        match self {
            DealiasRule::None => true,
            // |k_j| > (2/3)(n/2)  <=>  3|k_j| > n
            DealiasRule::TwoThirds => k.iter().all(|kj| 3 * kj.unsigned_abs() as usize <= n),
        }
    }
}

/// Real periodic scalar field held simultaneously as grid samples and as
/// Fourier coefficients `f̂(k)` with `Σ_k |f̂(k)|² = mean(f²)`.
///
/// Fields are immutable values; every operation returns a new field.
#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceField {
    grid: PeriodicGrid,
    values: Vec<f64>,
    coeffs: Vec<Complex64>,
    mean_zero: bool,
}

impl SurfaceField {
    pub fn from_values(grid: PeriodicGrid, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), grid.len(), "sample count does not match grid");
        let mut coeffs = vec![Complex64::new(0.0, 0.0); grid.len()];
        Transformer::new(grid).forward_real(&values, &mut coeffs);
        Self::assemble(grid, values, coeffs)
    }

    pub fn from_fn(grid: PeriodicGrid, f: impl Fn([f64; 2]) -> f64) -> Self {
        Self::from_values(grid, grid.sample(f))
    }

    /// Builds a field from coefficients, discarding any anti-Hermitian part.
    pub fn from_coeffs(grid: PeriodicGrid, coeffs: Vec<Complex64>) -> Self {
        assert_eq!(coeffs.len(), grid.len(), "coefficient count does not match grid");
        let mut sym = coeffs.clone();
        for (idx, c) in sym.iter_mut().enumerate() {
            let partner = coeffs[grid.conjugate_index(idx)].conj();
            *c = 0.5 * (coeffs[idx] + partner);
        }
        let mut buf = sym.clone();
        let mut values = vec![0.0; grid.len()];
        Transformer::new(grid).inverse_real(&mut buf, &mut values);
        Self::assemble(grid, values, sym)
    }

    pub fn zeros(grid: PeriodicGrid) -> Self {
        Self {
            grid,
            values: vec![0.0; grid.len()],
            coeffs: vec![Complex64::new(0.0, 0.0); grid.len()],
            mean_zero: true,
        }
    }

    pub fn constant(grid: PeriodicGrid, c: f64) -> Self {
        let mut coeffs = vec![Complex64::new(0.0, 0.0); grid.len()];
        coeffs[0] = Complex64::new(c, 0.0);
        Self::assemble(grid, vec![c; grid.len()], coeffs)
    }

    /// Single real Fourier mode `a cos(k·x) + b sin(k·x)`.
    pub fn mode(grid: PeriodicGrid, k: [i64; 2], cos_amp: f64, sin_amp: f64) -> Self {
        Self::from_fn(grid, |x| {
            let phase = k[0] as f64 * x[0] + k[1] as f64 * x[1];
            cos_amp * phase.cos() + sin_amp * phase.sin()
        })
    }

    fn assemble(grid: PeriodicGrid, values: Vec<f64>, coeffs: Vec<Complex64>) -> Self {
        let mut f = Self {
            grid,
            values,
            coeffs,
            mean_zero: false,
        };
        let l2 = f.l2_norm();
        f.mean_zero = f.coeffs[0].norm() <= MEAN_ZERO_TOL * l2;
        f
    }

    pub fn grid(&self) -> PeriodicGrid {
        self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn coeff(&self, k: [i64; 2]) -> Complex64 {
        self.coeffs[self.grid.index_of(k)]
    }

    pub fn is_mean_zero(&self) -> bool {
        self.mean_zero
    }

    /// Spatial average `(2π)^{-d} ∫ f`.
    pub fn mean(&self) -> f64 {
        self.coeffs[0].re
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Applies a Fourier multiplier `m(k)`; `m` must satisfy `m(-k) = conj(m(k))`.
    pub fn apply_multiplier(&self, m: impl Fn([i64; 2]) -> Complex64) -> Self {
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(idx, c)| c * m(self.grid.wavevector(idx)))
            .collect();
        Self::from_coeffs(self.grid, coeffs)
    }

    /// Applies a real even multiplier such as `|k| tanh(b|k|)`.
    pub fn apply_real_multiplier(&self, m: impl Fn([i64; 2]) -> f64) -> Self {
        self.apply_multiplier(|k| Complex64::new(m(k), 0.0))
    }

    /// `∂^α f` with multiplier `(ik)^α`. Odd orders annihilate Nyquist modes.
    pub fn derivative(&self, alpha: [usize; 2]) -> Result<Self> {
        let order = alpha[0] + alpha[1];
        if order > MAX_DERIVATIVE_ORDER {
            return Err(Error::OrderTooHigh(order));
        }
        if order == 0 {
            return Ok(self.clone());
        }
        if self.grid.dim() == 1 && alpha[1] > 0 {
            return Ok(Self::zeros(self.grid));
        }
        let ny = -((self.grid.n() / 2) as i64);
        let i_pow = match order % 4 {
            0 => Complex64::new(1.0, 0.0),
            1 => Complex64::new(0.0, 1.0),
            2 => Complex64::new(-1.0, 0.0),
            _ => Complex64::new(0.0, -1.0),
        };
        Ok(self.apply_multiplier(|k| {
            if (alpha[0] % 2 == 1 && k[0] == ny) || (alpha[1] % 2 == 1 && k[1] == ny) {
                return Complex64::new(0.0, 0.0);
            }
            let mag = (k[0] as f64).powi(alpha[0] as i32) * (k[1] as f64).powi(alpha[1] as i32);
            i_pow * mag
        }))
    }

    /// First derivative along axis `j` (0-based).
    pub fn partial(&self, j: usize) -> Self {
        let mut alpha = [0, 0];
        alpha[j] = 1;
        self.derivative(alpha).expect("first derivative is always admissible")
    }

    pub fn gradient(&self) -> Vec<Self> {
        (0..self.grid.dim()).map(|j| self.partial(j)).collect()
    }

    pub fn laplacian(&self) -> Self {
        self.apply_real_multiplier(|k| -((k[0] * k[0] + k[1] * k[1]) as f64))
    }

    /// Removes the zero mode exactly.
    pub fn project_mean_zero(&self) -> Self {
        let mut out = self.clone();
        let m = out.coeffs[0].re;
        out.coeffs[0] = Complex64::new(0.0, 0.0);
        for v in out.values.iter_mut() {
            *v -= m;
        }
        out.mean_zero = true;
        out
    }

    pub fn dealias(&self, rule: DealiasRule) -> Self {
        if rule == DealiasRule::None {
            return self.clone();
        }
        let n = self.grid.n();
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(idx, &c)| {
                if rule.keeps(self.grid.wavevector(idx), n) {
                    c
                } else {
                    Complex64::new(0.0, 0.0)
                }
            })
            .collect();
        Self::from_coeffs(self.grid, coeffs)
    }

    /// Pointwise product, truncated by `rule`.
    pub fn product(&self, other: &Self, rule: DealiasRule) -> Self {
        self.check_grid(other);
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a * b)
            .collect();
        Self::from_values(self.grid, values).dealias(rule)
    }

    /// Pointwise map on samples.
    pub fn map_values(&self, f: impl Fn(f64) -> f64) -> Self {
        Self::from_values(self.grid, self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn scale(&self, a: f64) -> Self {
        Self::assemble(
            self.grid,
            self.values.iter().map(|v| a * v).collect(),
            self.coeffs.iter().map(|c| c * a).collect(),
        )
    }

    /// `a·self + other` without a transform round trip.
    pub fn axpy(&self, a: f64, other: &Self) -> Self {
        self.check_grid(other);
        Self::assemble(
            self.grid,
            self.values
                .iter()
                .zip(&other.values)
                .map(|(x, y)| a * x + y)
                .collect(),
            self.coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(x, y)| x * a + y)
                .collect(),
        )
    }

    /// Translation `f(x1 - shift, x2)` by a spectral phase factor.
    pub fn translate(&self, shift: f64) -> Self {
        let ny = -((self.grid.n() / 2) as i64);
        self.apply_multiplier(|k| {
            if k[0] == ny {
                // keep the Nyquist bin real
                Complex64::new((k[0] as f64 * shift).cos(), 0.0)
            } else {
                Complex64::from_polar(1.0, -(k[0] as f64) * shift)
            }
        })
    }

    /// Root-mean-square norm, equal to `(Σ|f̂|²)^{1/2}`.
    pub fn l2_norm(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Grid `L²` norm computed from samples.
    pub fn l2_norm_values(&self) -> f64 {
        (self.values.iter().map(|v| v * v).sum::<f64>() / self.values.len() as f64).sqrt()
    }

    /// Unit-mass `L²` inner product.
    pub fn inner(&self, other: &Self) -> f64 {
        self.check_grid(other);
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a * b)
            .sum::<f64>()
            / self.values.len() as f64
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Grid proxy for the `W^{k,∞}` norm: max of `sup|∂^α f|` over `|α| ≤ k`.
    pub fn w_inf_norm(&self, order: usize) -> f64 {
        let mut best = 0.0_f64;
        for total in 0..=order.min(MAX_DERIVATIVE_ORDER) {
            for a0 in 0..=total {
                let a1 = total - a0;
                if self.grid.dim() == 1 && a1 > 0 {
                    continue;
                }
                let d = self.derivative([a0, a1]).expect("order checked");
                best = best.max(d.sup_norm());
            }
        }
        best
    }

    fn check_grid(&self, other: &Self) {
        assert_eq!(self.grid, other.grid, "fields live on different grids");
    }
}

impl Add for &SurfaceField {
    type Output = SurfaceField;
    fn add(self, rhs: &SurfaceField) -> SurfaceField {
        self.axpy(1.0, rhs)
    }
}

impl Sub for &SurfaceField {
    type Output = SurfaceField;
    fn sub(self, rhs: &SurfaceField) -> SurfaceField {
        rhs.axpy(-1.0, self)
    }
}

impl Neg for &SurfaceField {
    type Output = SurfaceField;
    fn neg(self) -> SurfaceField {
        self.scale(-1.0)
    }
}

impl Mul<&SurfaceField> for f64 {
    type Output = SurfaceField;
    fn mul(self, rhs: &SurfaceField) -> SurfaceField {
        rhs.scale(self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::random::{random_field, FieldSpec};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn grid(n: usize) -> PeriodicGrid {
        PeriodicGrid::one_d(n).unwrap()
    }

    #[test]
    fn zero_field_has_zero_coefficients() {
        let f = SurfaceField::from_values(grid(16), vec![0.0; 16]);
        assert!(f.coeffs().iter().all(|c| c.norm() == 0.0));
        assert!(f.is_mean_zero());
    }

    #[test]
    fn cosine_splits_into_two_half_modes() {
        let f = SurfaceField::from_fn(grid(32), |x| x[0].cos());
        assert!((f.coeff([1, 0]).re - 0.5).abs() < 1e-15);
        assert!((f.coeff([-1, 0]).re - 0.5).abs() < 1e-15);
        // Σ|f̂|² = mean(cos²) = 1/2
        assert!((f.l2_norm().powi(2) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn round_trip_is_accurate() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for &dim in &[1, 2] {
            let g = PeriodicGrid::new(dim, 32).unwrap();
            let values: Vec<f64> = (0..g.len()).map(|i| ((i * 37 % 11) as f64) - 5.0).collect();
            let f = SurfaceField::from_values(g, values.clone());
            let back = SurfaceField::from_coeffs(g, f.coeffs().to_vec());
            let scale = f.sup_norm();
            for (a, b) in back.values().iter().zip(&values) {
                assert!((a - b).abs() <= 1e-12 * scale);
            }
            let r = random_field(g, &FieldSpec::smooth(10), &mut rng);
            let rr = SurfaceField::from_coeffs(g, r.coeffs().to_vec());
            for (a, b) in rr.values().iter().zip(r.values()) {
                assert!((a - b).abs() <= 1e-12 * r.sup_norm());
            }
        }
    }

    #[test]
    fn derivative_of_cosine() {
        let g = grid(32);
        let f = SurfaceField::from_fn(g, |x| x[0].cos());
        let df = f.derivative([1, 0]).unwrap();
        for (i, v) in df.values().iter().enumerate() {
            assert!((v + g.point(i)[0].sin()).abs() < 1e-14);
        }
        assert_eq!(f.derivative([0, 0]).unwrap(), f);
        let f3 = SurfaceField::from_fn(g, |x| (3.0 * x[0]).cos());
        let d2 = f3.derivative([2, 0]).unwrap();
        for (a, b) in d2.values().iter().zip(f3.values()) {
            assert!((a + 9.0 * b).abs() < 1e-12);
        }
        assert_eq!(f.derivative([4, 3]), Err(Error::OrderTooHigh(7)));
    }

    #[test]
    fn mixed_derivatives_commute() {
        let g = PeriodicGrid::new(2, 16).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let f = random_field(g, &FieldSpec::smooth(5), &mut rng);
        let a = f.partial(0).partial(1);
        let b = f.partial(1).partial(0);
        let c = f.derivative([1, 1]).unwrap();
        for ((x, y), z) in a.values().iter().zip(b.values()).zip(c.values()) {
            assert!((x - y).abs() < 1e-13);
            assert!((x - z).abs() < 1e-13);
        }
    }

    #[test]
    fn dealias_rule_arithmetic() {
        let g = grid(16);
        // 3·7 = 21 > 16: mode 7 goes
        let f = SurfaceField::mode(g, [7, 0], 1.0, 0.0);
        assert!(f.dealias(DealiasRule::TwoThirds).l2_norm() < 1e-14);
        // 3·5 = 15 <= 16: mode 5 stays
        let f5 = SurfaceField::mode(g, [5, 0], 1.0, 0.0);
        let d5 = f5.dealias(DealiasRule::TwoThirds);
        assert!((d5.l2_norm() - f5.l2_norm()).abs() < 1e-14);
        let flat = SurfaceField::constant(g, 2.5);
        assert_eq!(flat.dealias(DealiasRule::TwoThirds).values(), flat.values());
        let once = f5.axpy(1.0, &f).dealias(DealiasRule::TwoThirds);
        assert_eq!(once.dealias(DealiasRule::TwoThirds).coeffs(), once.coeffs());
    }

    #[test]
    fn mean_projection_is_idempotent_and_contractive() {
        let g = grid(32);
        let f = SurfaceField::from_fn(g, |x| 1.5 + x[0].sin());
        assert!(!f.is_mean_zero());
        let p = f.project_mean_zero();
        assert!(p.is_mean_zero());
        assert_eq!(p.coeffs()[0].norm(), 0.0);
        assert_eq!(p.project_mean_zero(), p);
        assert!(p.l2_norm() <= f.l2_norm());
    }

    #[test]
    fn translation_shifts_samples() {
        let g = grid(32);
        let f = SurfaceField::from_fn(g, |x| x[0].cos() + 0.3 * (2.0 * x[0]).sin());
        let shifted = f.translate(g.spacing() * 3.0);
        for i in 0..32 {
            assert!((shifted.values()[(i + 3) % 32] - f.values()[i]).abs() < 1e-13);
        }
    }
}
