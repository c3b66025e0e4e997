//! Quantitative probes of the DN operator: Lipschitz gaps in the surface,
//! coercivity ratios and commutators with derivatives.

use nalgebra::{DMatrix, SymmetricEigen};

use super::{Depth, DnBackend, DnOperator, FluidConfig};
use crate::error::{Error, Result};
use crate::spectral::{half_norm, hs_norm, HalfNormWeight, SurfaceField};

/// `‖G[η₁]g − G[η₂]g‖_{H^{s−1}}`.
pub fn dn_contraction_gap(
    eta1: &SurfaceField,
    eta2: &SurfaceField,
    g: &SurfaceField,
    cfg: &FluidConfig,
    backend: &DnBackend,
    s: f64,
) -> Result<f64> {
    let a = DnOperator::new(eta1, cfg, backend)?.apply(g)?;
    let b = DnOperator::new(eta2, cfg, backend)?.apply(g)?;
    Ok(hs_norm(&(&a - &b), s - 1.0))
}

/// `(G[η]g, g) / ‖g‖²_{Ḣ^{1/2}}` for mean-zero `g ≠ 0`.
pub fn coercivity_ratio(
    eta: &SurfaceField,
    g: &SurfaceField,
    cfg: &FluidConfig,
    backend: &DnBackend,
    weight: HalfNormWeight,
) -> Result<f64> {
    let denom = half_norm(g, weight).powi(2);
    if denom == 0.0 {
        return Err(Error::ZeroInput);
    }
    let mean = g.mean();
    if mean.abs() > 1e-12 * g.l2_norm() {
        return Err(Error::MeanNotZero { mean });
    }
    let gg = DnOperator::new(eta, cfg, backend)?.apply(g)?;
    Ok(gg.inner(g) / denom)
}

/// Infimum of the coercivity ratio (weight `|k|`) over the span of the
/// real Fourier modes with `1 ≤ |k|_∞ ≤ kmax`.
///
/// Computed as the smallest eigenvalue of the symmetrized Galerkin matrix
/// of `G[η]` relative to the diagonal `Ḣ^{1/2}` Gram matrix, so it is a
/// true minimum over the band rather than an ensemble sample.
pub fn coercivity_infimum_band(
    eta: &SurfaceField,
    cfg: &FluidConfig,
    backend: &DnBackend,
    kmax: i64,
) -> Result<f64> {
    let grid = cfg.grid;
    if kmax < 1 || 3 * kmax > grid.n() as i64 {
        return Err(Error::InvalidParameter(format!(
            "band limit {kmax} outside [1, n/3]"
        )));
    }
    let op = DnOperator::new(eta, cfg, backend)?;
    // one representative per ±k pair: first nonzero component positive
    let mut modes = Vec::new();
    let k2_range: Vec<i64> = if grid.dim() == 2 { (-kmax..=kmax).collect() } else { vec![0] };
    for k1 in 0..=kmax {
        for &k2 in &k2_range {
            if k1 == 0 && k2 <= 0 {
                continue;
            }
            modes.push([k1, k2]);
        }
    }
    let mut basis = Vec::with_capacity(2 * modes.len());
    let mut weights = Vec::with_capacity(2 * modes.len());
    for &k in &modes {
        for (c, s) in [(1.0, 0.0), (0.0, 1.0)] {
            let f = SurfaceField::mode(grid, k, c, s);
            weights.push(half_norm(&f, HalfNormWeight::Standard).powi(2));
            basis.push(f);
        }
    }
    let images = basis
        .iter()
        .map(|f| op.apply(f))
        .collect::<Result<Vec<_>>>()?;
    let m = basis.len();
    let mut a = DMatrix::<f64>::zeros(m, m);
    for i in 0..m {
        for j in 0..m {
            let aij = 0.5 * (images[j].inner(&basis[i]) + images[i].inner(&basis[j]));
            a[(i, j)] = aij / (weights[i] * weights[j]).sqrt();
        }
    }
    let eig = SymmetricEigen::new(a);
    Ok(eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min))
}

/// Shape of the coercivity constant with the unknown dimensional constant
/// set to one: `𝔡 / (1 + ‖∇η‖²_∞ + ‖η+b‖²_{W^{1,∞}})` in finite depth with
/// `𝔡 = inf(η + b)`, and `1 / (1 + ‖∇η‖_∞)` in deep fluid.
pub fn coercivity_bound_shape(eta: &SurfaceField, cfg: &FluidConfig) -> f64 {
    let grad_sup = eta
        .gradient()
        .iter()
        .map(|g| g.sup_norm())
        .fold(0.0, f64::max);
    match cfg.depth {
        Depth::Finite { b } => {
            let gap = eta.min_value() + b;
            let w1 = eta.map_values(|v| v + b).sup_norm() + grad_sup;
            gap / (1.0 + grad_sup * grad_sup + w1 * w1)
        }
        Depth::Infinite { .. } => 1.0 / (1.0 + grad_sup),
    }
}

/// Commutator `[∂^α, G[η]]f` and its gain ratio.
#[derive(Debug, Clone)]
pub struct CommutatorResult {
    pub field: SurfaceField,
    /// `‖[∂^α, G[η]]f‖_{H^σ} / ‖f‖_{H^{σ+|α|}}`.
    pub ratio: f64,
}

/// `∂^α(G[η]f) − G[η](∂^α f)`.
pub fn commutator_residual(
    eta: &SurfaceField,
    f: &SurfaceField,
    alpha: [usize; 2],
    sigma: f64,
    cfg: &FluidConfig,
    backend: &DnBackend,
) -> Result<CommutatorResult> {
    if sigma < 0.5 {
        return Err(Error::InvalidParameter(format!("sigma = {sigma} must be at least 1/2")));
    }
    let op = DnOperator::new(eta, cfg, backend)?;
    let outer = op.apply(f)?.derivative(alpha)?;
    let inner = op.apply(&f.derivative(alpha)?)?;
    let field = &outer - &inner;
    let order = (alpha[0] + alpha[1]) as f64;
    let denom = hs_norm(f, sigma + order);
    if denom == 0.0 {
        return Err(Error::ZeroInput);
    }
    let ratio = hs_norm(&field, sigma) / denom;
    Ok(CommutatorResult { field, ratio })
}
