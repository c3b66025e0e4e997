//! Dirichlet–Neumann operator `G[η]g = ∇ψ·(−∇η, 1)|_{y=η}` for the harmonic
//! extension `ψ` of `g` below the graph of `η`.
//!
//! Three interchangeable backends are provided: the flat multiplier
//! `|k| tanh(b|k|)`, the Craig–Sulem series in powers of `η`, and a
//! σ-coordinate Chebyshev–Fourier collocation solve of the Laplace problem.
//! [`DnOperator`] prepares a backend for one surface so it can be applied
//! and inverted repeatedly.

mod chebyshev;
mod craig_sulem;
mod diagnostics;
mod elliptic;
mod inverse;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::{DealiasRule, PeriodicGrid, SurfaceField};

pub use craig_sulem::dn_craig_sulem;
pub use diagnostics::{
    coercivity_bound_shape, coercivity_infimum_band, coercivity_ratio, commutator_residual,
    dn_contraction_gap, CommutatorResult,
};
pub use elliptic::{dn_elliptic, MappedElliptic};
pub use inverse::dn_inverse;
pub(crate) use inverse::inner_tolerance as dn_inverse_tolerance;

/// Default truncation depth for the infinite-depth elliptic backend.
pub const DEFAULT_TRUNCATION_DEPTH: f64 = 12.0;

/// Bottom of the fluid domain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Depth {
    /// Flat bottom at `y = -b`.
    Finite { b: f64 },
    /// Deep fluid. The elliptic backend truncates at `y = -truncation_depth`
    /// with a no-flux condition; the error decays like `e^{-2|k| depth}`.
    Infinite { truncation_depth: f64 },
}

/// Geometry shared by every DN evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FluidConfig {
    pub depth: Depth,
    /// Minimum admissible `inf(η + b)` in finite depth.
    pub separation: f64,
    pub grid: PeriodicGrid,
}

impl FluidConfig {
    /// Finite depth `b` with the default margin `0.1 b`.
    pub fn finite(b: f64, grid: PeriodicGrid) -> Self {
        Self {
            depth: Depth::Finite { b },
            separation: 0.1 * b,
            grid,
        }
    }

    pub fn infinite(grid: PeriodicGrid) -> Self {
        Self {
            depth: Depth::Infinite {
                truncation_depth: DEFAULT_TRUNCATION_DEPTH,
            },
            separation: 0.1,
            grid,
        }
    }

    pub fn with_separation(mut self, separation: f64) -> Self {
        self.separation = separation;
        self
    }

    pub fn validate(&self) -> Result<()> {
        match self.depth {
            Depth::Finite { b } if !(b > 0.0 && b.is_finite()) => {
                return Err(Error::InvalidParameter(format!("depth b = {b} must be positive")))
            }
            Depth::Infinite { truncation_depth } if !(truncation_depth > 0.0) => {
                return Err(Error::InvalidParameter(format!(
                    "truncation depth {truncation_depth} must be positive"
                )))
            }
            _ => {}
        }
        if !(self.separation > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "separation margin {} must be positive",
                self.separation
            )));
        }
        Ok(())
    }

    /// `b` in finite depth, `None` for deep fluid.
    pub fn finite_depth(&self) -> Option<f64> {
        match self.depth {
            Depth::Finite { b } => Some(b),
            Depth::Infinite { .. } => None,
        }
    }

    /// Symbol of `G[0]`: `|k| tanh(b|k|)` or `|k|`.
    pub fn flat_symbol(&self, k: [i64; 2]) -> f64 {
        let kabs = ((k[0] * k[0] + k[1] * k[1]) as f64).sqrt();
        match self.depth {
            Depth::Finite { b } => kabs * (b * kabs).tanh(),
            Depth::Infinite { .. } => kabs,
        }
    }

    /// Checks the separation / truncation conditions for a surface.
    pub fn check_admissible(&self, eta: &SurfaceField) -> Result<()> {
        self.validate()?;
        if eta.grid() != self.grid {
            return Err(Error::GridMismatch);
        }
        if !eta.is_finite() {
            return Err(Error::InvalidParameter("surface has non-finite samples".into()));
        }
        match self.depth {
            Depth::Finite { b } => {
                let min_depth = eta.min_value() + b;
                if min_depth < self.separation {
                    return Err(Error::SeparationViolated {
                        min_depth,
                        margin: self.separation,
                    });
                }
            }
            Depth::Infinite { truncation_depth } => {
                let required = 4.0 * (eta.sup_norm() + 1.0);
                if truncation_depth < required {
                    return Err(Error::TruncationTooShallow {
                        depth: truncation_depth,
                        required,
                    });
                }
            }
        }
        Ok(())
    }
}

/// Numerical realization of `G[η]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum DnBackend {
    /// `G[0]`, ignoring the surface.
    Flat,
    /// Series truncated after the term of degree `order` in `η`.
    CraigSulem {
        order: usize,
        #[serde(default)]
        dealias: DealiasRule,
    },
    /// σ-mapped Laplace solve with Chebyshev–Lobatto collocation in depth.
    MappedElliptic {
        vertical_points: usize,
        solver_tol: f64,
    },
}

impl Default for DnBackend {
    fn default() -> Self {
        DnBackend::MappedElliptic {
            vertical_points: 64,
            solver_tol: 1e-12,
        }
    }
}

impl DnBackend {
    pub fn craig_sulem(order: usize) -> Self {
        DnBackend::CraigSulem {
            order,
            dealias: DealiasRule::TwoThirds,
        }
    }

    pub fn elliptic(vertical_points: usize, solver_tol: f64) -> Self {
        DnBackend::MappedElliptic {
            vertical_points,
            solver_tol,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            DnBackend::Flat => Ok(()),
            DnBackend::CraigSulem { order, .. } if order > 8 => Err(Error::InvalidParameter(
                format!("Craig-Sulem order {order} outside [0, 8]"),
            )),
            DnBackend::MappedElliptic {
                vertical_points,
                solver_tol,
            } => {
                if vertical_points < 16 {
                    return Err(Error::InvalidParameter(format!(
                        "vertical_points = {vertical_points} must be at least 16"
                    )));
                }
                if !(1e-14..=1e-6).contains(&solver_tol) {
                    return Err(Error::InvalidParameter(format!(
                        "solver_tol = {solver_tol:e} outside [1e-14, 1e-6]"
                    )));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }
}

/// Diagnostics from one mapped-elliptic solve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EllipticSolveReport {
    pub iterations: usize,
    /// Relative residual of the collocation system.
    pub residual: f64,
    pub backend: DnBackend,
}

/// `G[0]g`, always mean-zero.
pub fn dn_flat(g: &SurfaceField, cfg: &FluidConfig) -> SurfaceField {
    g.apply_real_multiplier(|k| cfg.flat_symbol(k)).project_mean_zero()
}

/// Inverse of the flat symbol on mean-zero data.
pub fn dn_flat_inverse(h: &SurfaceField, cfg: &FluidConfig) -> SurfaceField {
    h.apply_real_multiplier(|k| {
        if k == [0, 0] {
            0.0
        } else {
            1.0 / cfg.flat_symbol(k)
        }
    })
    .project_mean_zero()
}

enum Prepared {
    Flat,
    CraigSulem { order: usize, dealias: DealiasRule },
    Elliptic(Box<MappedElliptic>),
}

/// `G[η]` prepared for a fixed surface and backend.
pub struct DnOperator {
    cfg: FluidConfig,
    backend: DnBackend,
    eta: SurfaceField,
    prepared: Prepared,
}

impl DnOperator {
    pub fn new(eta: &SurfaceField, cfg: &FluidConfig, backend: &DnBackend) -> Result<Self> {
        backend.validate()?;
        cfg.check_admissible(eta)?;
        let prepared = match *backend {
            DnBackend::Flat => Prepared::Flat,
            DnBackend::CraigSulem { order, dealias } => Prepared::CraigSulem { order, dealias },
            DnBackend::MappedElliptic {
                vertical_points,
                solver_tol,
            } => Prepared::Elliptic(Box::new(MappedElliptic::new(
                eta,
                cfg,
                vertical_points,
                solver_tol,
            )?)),
        };
        Ok(Self {
            cfg: *cfg,
            backend: *backend,
            eta: eta.clone(),
            prepared,
        })
    }

    pub fn surface(&self) -> &SurfaceField {
        &self.eta
    }

    pub fn config(&self) -> &FluidConfig {
        &self.cfg
    }

    pub fn backend(&self) -> &DnBackend {
        &self.backend
    }

    /// Backend output before the final mean projection, with the solve
    /// report for the elliptic backend.
    pub fn apply_raw(&self, g: &SurfaceField) -> Result<(SurfaceField, Option<EllipticSolveReport>)> {
        if g.grid() != self.cfg.grid {
            return Err(Error::GridMismatch);
        }
        match &self.prepared {
            Prepared::Flat => Ok((dn_flat(g, &self.cfg), None)),
            Prepared::CraigSulem { order, dealias } => Ok((
                craig_sulem::series(&self.eta, g, &self.cfg, *order, *dealias)?,
                None,
            )),
            Prepared::Elliptic(solver) => {
                let (out, report) = solver.solve(g)?;
                Ok((out, Some(report)))
            }
        }
    }

    /// `G[η]g`, projected to mean zero.
    pub fn apply(&self, g: &SurfaceField) -> Result<SurfaceField> {
        Ok(self.apply_raw(g)?.0.project_mean_zero())
    }

    /// `(G[η])^{-1} h` on mean-zero data; see [`dn_inverse`].
    pub fn inverse(&self, h: &SurfaceField, tol: f64) -> Result<SurfaceField> {
        inverse::invert(self, h, tol, None)
    }

    /// Like [`DnOperator::inverse`] with an initial guess.
    pub fn inverse_from(&self, h: &SurfaceField, tol: f64, guess: &SurfaceField) -> Result<SurfaceField> {
        inverse::invert(self, h, tol, Some(guess))
    }

    /// `G[η]g` projected to mean zero. The elliptic backend starts from
    /// `guess` and also returns its interior solution for the next call;
    /// the other backends ignore the guess and return `None`.
    pub fn apply_warm(&self, g: &SurfaceField, guess: Option<&[f64]>) -> Result<(SurfaceField, Option<Vec<f64>>)> {
        match &self.prepared {
            Prepared::Elliptic(solver) => {
                if g.grid() != self.cfg.grid {
                    return Err(Error::GridMismatch);
                }
                let (out, _, interior) = solver.solve_with_guess(g, guess)?;
                Ok((out.project_mean_zero(), Some(interior)))
            }
            _ => Ok((self.apply(g)?, None)),
        }
    }
}

/// `G[η]g` with the selected backend; the result is always mean-zero.
pub fn dn_apply(
    eta: &SurfaceField,
    g: &SurfaceField,
    cfg: &FluidConfig,
    backend: &DnBackend,
) -> Result<SurfaceField> {
    DnOperator::new(eta, cfg, backend)?.apply(g)
}
