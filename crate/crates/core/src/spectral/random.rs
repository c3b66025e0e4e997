//! Seeded generators for smooth mean-zero test surfaces.

use num_complex::Complex64;
use rand::Rng;

use super::field::SurfaceField;
use super::grid::PeriodicGrid;

/// Band and spectral decay of a random field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldSpec {
    /// Modes with `kmin ≤ |k|_∞ ≤ kmax` are populated.
    pub kmin: i64,
    pub kmax: i64,
    /// Coefficient envelope `(1 + |k|²)^{-decay/2}`.
    pub decay: f64,
}

impl FieldSpec {
    pub fn smooth(kmax: i64) -> Self {
        Self {
            kmin: 1,
            kmax,
            decay: 2.0,
        }
    }

    pub fn band(kmin: i64, kmax: i64) -> Self {
        Self {
            kmin,
            kmax,
            decay: 0.0,
        }
    }
}

/// Real mean-zero field with uniformly random coefficients inside the band.
pub fn random_field(grid: PeriodicGrid, spec: &FieldSpec, rng: &mut impl Rng) -> SurfaceField {
    let mut coeffs = vec![Complex64::new(0.0, 0.0); grid.len()];
    let kmax = spec.kmax.min(grid.n() as i64 / 2 - 1);
    for idx in 0..grid.len() {
        let k = grid.wavevector(idx);
        let kinf = k[0].abs().max(k[1].abs());
        if kinf < spec.kmin.max(1) || kinf > kmax {
            continue;
        }
        // draw once per ± pair so the field is real; keyed on the first nonzero component
        let canonical = k[0] > 0 || (k[0] == 0 && k[1] > 0);
        if !canonical {
            continue;
        }
        let ksq = (k[0] * k[0] + k[1] * k[1]) as f64;
        let env = (1.0 + ksq).powf(-spec.decay / 2.0);
        let c = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)) * env;
        coeffs[idx] = c;
        coeffs[grid.conjugate_index(idx)] = c.conj();
    }
    SurfaceField::from_coeffs(grid, coeffs).project_mean_zero()
}

/// Random field rescaled so that its `W^{order,∞}` grid norm equals `target`.
pub fn random_field_with_w_norm(
    grid: PeriodicGrid,
    spec: &FieldSpec,
    order: usize,
    target: f64,
    rng: &mut impl Rng,
) -> SurfaceField {
    let f = random_field(grid, spec, rng);
    let w = f.w_inf_norm(order);
    f.scale(target / w)
}
