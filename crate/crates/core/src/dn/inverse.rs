//! Inversion of `G[η]` on mean-zero data by flat-preconditioned GMRES.

use super::{dn_flat_inverse, DnBackend, DnOperator, FluidConfig};
use crate::error::{Error, Result};
use crate::krylov::{gmres, GmresConfig};
use crate::spectral::SurfaceField;

const MAX_REFINEMENTS: usize = 4;

/// Mean-zero tolerance on the right-hand side, relative to its L² norm.
const MEAN_TOL: f64 = 1e-12;

/// Elliptic tolerance used for the matvecs of an inversion to `tol`.
/// Below `1e-13` the collocation solve reaches its round-off floor.
pub(crate) fn inner_tolerance(tol: f64, solver_tol: f64) -> f64 {
    (0.05 * tol).max(1e-13).min(solver_tol)
}

fn project(values: &[f64]) -> (Vec<f64>, f64) {
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    (values.iter().map(|v| v - mean).collect(), mean)
}

/// Solves `G[η]g = h` for mean-zero `g` with
/// `‖G[η]g − h‖_{L²} ≤ tol ‖h‖_{L²}`.
pub(crate) fn invert(
    op: &DnOperator,
    h: &SurfaceField,
    tol: f64,
    guess: Option<&SurfaceField>,
) -> Result<SurfaceField> {
    let cfg = *op.config();
    let grid = cfg.grid;
    if h.grid() != grid {
        return Err(Error::GridMismatch);
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter(format!("tolerance {tol:e} must be positive")));
    }
    let h_norm = h.l2_norm();
    let mean = h.mean();
    if mean.abs() > MEAN_TOL * h_norm.max(f64::MIN_POSITIVE) && mean.abs() > 1e-300 {
        return Err(Error::MeanNotZero { mean });
    }
    let h = h.project_mean_zero();
    if h_norm == 0.0 {
        return Ok(SurfaceField::zeros(grid));
    }

    // matvecs must be more accurate than the requested residual
    let tightened;
    let op = match *op.backend() {
        DnBackend::MappedElliptic {
            vertical_points,
            solver_tol,
        } if inner_tolerance(tol, solver_tol) < solver_tol => {
            let inner = inner_tolerance(tol, solver_tol);
            tightened = DnOperator::new(op.surface(), &cfg, &DnBackend::elliptic(vertical_points, inner))?;
            &tightened
        }
        _ => op,
    };

    let apply = |x: &[f64], out: &mut [f64]| -> Result<()> {
        // the constant mode is mapped to itself so the system is nonsingular
        let (xp, mean) = project(x);
        let gx = op.apply(&SurfaceField::from_values(grid, xp))?;
        for (o, v) in out.iter_mut().zip(gx.values()) {
            *o = v + mean;
        }
        Ok(())
    };
    let precondition = |r: &[f64], z: &mut [f64]| -> Result<()> {
        let (rp, mean) = project(r);
        let zr = dn_flat_inverse(&SurfaceField::from_values(grid, rp), &cfg);
        for (o, v) in z.iter_mut().zip(zr.values()) {
            *o = v + mean;
        }
        Ok(())
    };

    let mut x: Vec<f64> = match guess {
        Some(g) if g.grid() == grid => g.project_mean_zero().values().to_vec(),
        _ => dn_flat_inverse(&h, &cfg).values().to_vec(),
    };
    let gmres_cfg = GmresConfig {
        restart: 40,
        max_iter: 400,
        tol: 0.5 * tol,
    };
    let mut residual = f64::INFINITY;
    for _ in 0..MAX_REFINEMENTS {
        let outcome = gmres(&apply, &precondition, h.values(), &mut x, &gmres_cfg)?;
        let g = SurfaceField::from_values(grid, x.clone()).project_mean_zero();
        residual = (&op.apply(&g)? - &h).l2_norm() / h_norm;
        if residual <= tol {
            return Ok(g);
        }
        if !outcome.converged && outcome.iterations == 0 {
            break;
        }
    }
    Err(Error::NoConvergence {
        max_iterations: gmres_cfg.max_iter * MAX_REFINEMENTS,
        residual,
    })
}

/// `(G[η])^{-1} h` for mean-zero `h`; the result is mean-zero and satisfies
/// `‖G[η]g − h‖_{L²} ≤ tol ‖h‖_{L²}`.
pub fn dn_inverse(
    eta: &SurfaceField,
    h: &SurfaceField,
    cfg: &FluidConfig,
    backend: &DnBackend,
    tol: f64,
) -> Result<SurfaceField> {
    DnOperator::new(eta, cfg, backend)?.inverse(h, tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::PeriodicGrid;

    #[test]
    fn flat_inverse_of_cosine() {
        let grid = PeriodicGrid::one_d(32).unwrap();
        let cfg = FluidConfig::finite(1.0, grid);
        let eta = SurfaceField::zeros(grid);
        let h = SurfaceField::from_fn(grid, |x| x[0].cos());
        let g = dn_inverse(&eta, &h, &cfg, &DnBackend::craig_sulem(0), 1e-12).unwrap();
        let t = 1.0_f64.tanh();
        for (a, b) in g.values().iter().zip(h.values()) {
            assert!((a - b / t).abs() < 1e-12);
        }
    }

    #[test]
    fn constant_is_rejected() {
        let grid = PeriodicGrid::one_d(16).unwrap();
        let cfg = FluidConfig::finite(1.0, grid);
        let eta = SurfaceField::zeros(grid);
        let h = SurfaceField::constant(grid, 1.0);
        assert!(matches!(
            dn_inverse(&eta, &h, &cfg, &DnBackend::Flat, 1e-10),
            Err(Error::MeanNotZero { .. })
        ));
    }

    #[test]
    fn round_trip_with_series_backend() {
        let grid = PeriodicGrid::one_d(64).unwrap();
        let cfg = FluidConfig::finite(1.0, grid);
        let eta = SurfaceField::from_fn(grid, |x| 0.2 * x[0].cos() - 0.1 * (2.0 * x[0]).sin());
        let backend = DnBackend::craig_sulem(4);
        let g = SurfaceField::from_fn(grid, |x| (3.0 * x[0]).sin() + 0.3 * x[0].cos());
        let op = DnOperator::new(&eta, &cfg, &backend).unwrap();
        let h = op.apply(&g).unwrap();
        let back = op.inverse(&h, 1e-12).unwrap();
        assert!((&back - &g).l2_norm() < 1e-10);
    }
}
