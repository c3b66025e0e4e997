//! Slowly traveling waves `−γ∂₁η = −G[η](η + φ)` near the trivial wave
//! `(η, γ) = (−φ, 0)`.
//!
//! With `ζ = η + φ` the wave is a fixed point of
//!
//! ```text
//! T_γ(ζ) = (G[−φ])⁻¹ { γ∂₁ζ − γ∂₁φ − (G[ζ−φ]ζ − G[−φ]ζ) }
//! ```
//!
//! which is iterated by Picard steps in `H^s` while the `W^{1,∞}` size of
//! `ζ` is kept inside the ball of radius `δ`.

use crate::dn::{dn_inverse_tolerance, DnBackend, DnOperator, FluidConfig};
use crate::error::{Error, Result};
use crate::spectral::{hs_norm, SurfaceField};

/// Consecutive non-contracting Picard steps that signal divergence.
const DIVERGENCE_WINDOW: usize = 3;

/// Relative accuracy of the inner `(G[−φ])⁻¹` solves.
const INVERSE_TOL: f64 = 4e-12;

/// Absolute accuracy of an inner solve, as a fraction of the outer tolerance.
const INVERSE_ABS_FRACTION: f64 = 1e-3;

/// Relative inner tolerance; near a fixed point at `ζ = 0` the right-hand
/// side shrinks to round-off and only absolute accuracy is meaningful.
fn inverse_tol(rhs_norm: f64, outer_tol: f64) -> f64 {
    if rhs_norm > 0.0 {
        INVERSE_TOL.max(INVERSE_ABS_FRACTION * outer_tol / rhs_norm).min(0.1)
    } else {
        INVERSE_TOL
    }
}

/// Parameters of one traveling-wave solve.
#[derive(Debug, Clone)]
pub struct TravelingWaveProblem {
    pub phi: SurfaceField,
    pub gamma: f64,
    pub cfg: FluidConfig,
    /// Radius of the `W^{1,∞}` ball for `ζ`.
    pub delta: f64,
    /// Tolerance on `‖ζ_{n+1} − ζ_n‖_{H^s}` and on the residual.
    pub tol: f64,
    pub max_iter: usize,
    /// Sobolev index of the iteration norm.
    pub s: f64,
}

impl TravelingWaveProblem {
    /// Problem with `δ = ½ min(1, μ(φ))`, `tol = 1e-11`, `s = 3`.
    pub fn new(phi: SurfaceField, gamma: f64, cfg: FluidConfig) -> Result<Self> {
        let mu = separation_of(&phi, &cfg);
        let prob = Self {
            phi,
            gamma,
            cfg,
            delta: 0.5 * mu.min(1.0),
            tol: 1e-11,
            max_iter: 200,
            s: 3.0,
        };
        prob.validate()?;
        Ok(prob)
    }

    pub fn with_delta(mut self, delta: f64) -> Result<Self> {
        self.delta = delta;
        self.validate()?;
        Ok(self)
    }

    pub fn with_tol(mut self, tol: f64) -> Result<Self> {
        self.tol = tol;
        self.validate()?;
        Ok(self)
    }

    pub fn with_max_iter(mut self, max_iter: usize) -> Self {
        self.max_iter = max_iter;
        self
    }

    pub fn with_gamma(mut self, gamma: f64) -> Self {
        self.gamma = gamma;
        self
    }

    /// `μ(φ) = inf(b − φ)`; infinite in deep fluid.
    pub fn separation(&self) -> f64 {
        separation_of(&self.phi, &self.cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.cfg.validate()?;
        if self.phi.grid() != self.cfg.grid {
            return Err(Error::GridMismatch);
        }
        let mean = self.phi.mean();
        if mean.abs() > 1e-12 * self.phi.l2_norm().max(1.0) {
            return Err(Error::MeanNotZero { mean });
        }
        let mu = self.separation();
        if !(mu > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "pressure reaches the bottom: inf(b - phi) = {mu}"
            )));
        }
        if !(self.delta > 0.0 && self.delta < 1.0 && self.delta < mu) {
            return Err(Error::InvalidParameter(format!(
                "ball radius {} outside (0, min(1, {mu}))",
                self.delta
            )));
        }
        if !self.gamma.is_finite() {
            return Err(Error::InvalidParameter("speed must be finite".into()));
        }
        if !(self.tol > 0.0) {
            return Err(Error::InvalidParameter(format!("tolerance {} must be positive", self.tol)));
        }
        Ok(())
    }
}

fn separation_of(phi: &SurfaceField, cfg: &FluidConfig) -> f64 {
    match cfg.finite_depth() {
        Some(b) => b - phi.max_value(),
        None => f64::INFINITY,
    }
}

/// A converged wave.
#[derive(Debug, Clone)]
pub struct TravelingWaveSolution {
    /// Mean-zero surface `η = ζ* − φ`.
    pub eta: SurfaceField,
    pub gamma: f64,
    /// `‖−γ∂₁η + G[η](η+φ)‖_{H^{s−1}}` from the default elliptic backend.
    pub residual: f64,
    /// `‖ζ_{n+1} − ζ_n‖_{H^s}` per Picard step.
    pub iter_trace: Vec<f64>,
    /// Geometric mean of successive difference ratios above the noise
    /// floor; zero when the first step already converged.
    pub contraction_factor: f64,
    pub backend: DnBackend,
}

impl TravelingWaveSolution {
    pub fn iterations(&self) -> usize {
        self.iter_trace.len()
    }

    /// `ζ* = η + φ`.
    pub fn zeta(&self, phi: &SurfaceField) -> SurfaceField {
        &self.eta + phi
    }
}

/// `T_γ` with the base operator `G[−φ]` prepared once.
pub struct FixedPointMap {
    prob: TravelingWaveProblem,
    backend: DnBackend,
    base: DnOperator,
    minus_phi: SurfaceField,
    forcing: SurfaceField,
}

impl FixedPointMap {
    pub fn new(prob: &TravelingWaveProblem, backend: &DnBackend) -> Result<Self> {
        prob.validate()?;
        let minus_phi = prob.phi.scale(-1.0);
        // build the base at the accuracy the inverse needs so it is reused
        let base_backend = match *backend {
            DnBackend::MappedElliptic {
                vertical_points,
                solver_tol,
            } => DnBackend::elliptic(vertical_points, dn_inverse_tolerance(INVERSE_TOL, solver_tol)),
            other => other,
        };
        let base = DnOperator::new(&minus_phi, &prob.cfg, &base_backend)?;
        let forcing = prob.phi.partial(0).scale(-1.0);
        Ok(Self {
            prob: prob.clone(),
            backend: *backend,
            base,
            minus_phi,
            forcing,
        })
    }

    pub fn problem(&self) -> &TravelingWaveProblem {
        &self.prob
    }

    /// `T_γ(ζ)`, optionally starting the inner inversion from `guess`.
    pub fn apply(&self, zeta: &SurfaceField, guess: Option<&SurfaceField>) -> Result<SurfaceField> {
        self.apply_with_gamma(zeta, self.prob.gamma, guess)
    }

    pub(crate) fn apply_with_gamma(
        &self,
        zeta: &SurfaceField,
        gamma: f64,
        guess: Option<&SurfaceField>,
    ) -> Result<SurfaceField> {
        let mu = self.prob.separation();
        let sup = zeta.sup_norm();
        if sup >= mu {
            return Err(Error::BallExit { norm: sup, radius: mu });
        }
        let zeta = zeta.project_mean_zero();
        let surface = &zeta + &self.minus_phi;
        let moved = DnOperator::new(&surface, &self.prob.cfg, &self.backend)?.apply(&zeta)?;
        let flat = self.base.apply(&zeta)?;
        let transport = (&zeta.partial(0) + &self.forcing).scale(gamma);
        let rhs = (&transport - &(&moved - &flat)).project_mean_zero();
        let tol = inverse_tol(rhs.l2_norm(), self.prob.tol);
        match guess {
            Some(g) => self.base.inverse_from(&rhs, tol, g),
            None => self.base.inverse(&rhs, tol),
        }
    }
}

/// One application of `T_γ`.
pub fn apply_t(zeta: &SurfaceField, prob: &TravelingWaveProblem, backend: &DnBackend) -> Result<SurfaceField> {
    FixedPointMap::new(prob, backend)?.apply(zeta, None)
}

/// `‖−γ∂₁η + G[η](η + φ)‖_{H^{s−1}}`.
pub fn residual(
    eta: &SurfaceField,
    gamma: f64,
    phi: &SurfaceField,
    cfg: &FluidConfig,
    backend: &DnBackend,
    s: f64,
) -> Result<f64> {
    let g = DnOperator::new(eta, cfg, backend)?.apply(&(eta + phi))?;
    let r = eta.partial(0).scale(-gamma).axpy(1.0, &g);
    Ok(hs_norm(&r, s - 1.0))
}

fn contraction_factor(trace: &[f64], floor: f64) -> f64 {
    let logs: Vec<f64> = trace
        .windows(2)
        .filter(|w| w[0] > floor && w[1] > floor)
        .map(|w| (w[1] / w[0]).ln())
        .collect();
    if logs.is_empty() {
        0.0
    } else {
        (logs.iter().sum::<f64>() / logs.len() as f64).exp()
    }
}

/// Local Lipschitz ratio of `T_γ` at `zeta` along `direction`.
fn probe_contraction(
    map: &FixedPointMap,
    gamma: f64,
    zeta: &SurfaceField,
    direction: &SurfaceField,
    s: f64,
) -> Result<f64> {
    let size = hs_norm(direction, s);
    if size == 0.0 {
        return Ok(0.0);
    }
    let step = direction.scale(1e-3 * map.prob.delta / direction.w_inf_norm(1).max(f64::MIN_POSITIVE));
    let a = map.apply_with_gamma(zeta, gamma, None)?;
    let b = map.apply_with_gamma(&(zeta + &step), gamma, None)?;
    Ok(hs_norm(&(&b - &a), s) / hs_norm(&step, s))
}

/// Picard iteration `ζ_{n+1} = T_γ(ζ_n)` from `zeta0` (zero by default).
pub fn solve_traveling_wave(
    prob: &TravelingWaveProblem,
    backend: &DnBackend,
    zeta0: Option<&SurfaceField>,
) -> Result<TravelingWaveSolution> {
    let map = FixedPointMap::new(prob, backend)?;
    solve_with_map(&map, prob.gamma, zeta0)
}

fn solve_with_map(
    map: &FixedPointMap,
    gamma: f64,
    zeta0: Option<&SurfaceField>,
) -> Result<TravelingWaveSolution> {
    let prob = &map.prob;
    let grid = prob.cfg.grid;
    let mut zeta = match zeta0 {
        Some(z) if z.grid() != grid => return Err(Error::GridMismatch),
        Some(z) => z.project_mean_zero(),
        None => SurfaceField::zeros(grid),
    };
    let mut trace = Vec::new();
    let mut ratios = Vec::new();
    let mut converged_once = false;
    for _ in 0..prob.max_iter {
        let next = map.apply_with_gamma(&zeta, gamma, Some(&zeta))?;
        let diff = &next - &zeta;
        let d = hs_norm(&diff, prob.s);
        if let Some(&prev) = trace.last() {
            let prev: f64 = prev;
            if prev > 0.0 {
                ratios.push(d / prev);
            }
        }
        trace.push(d);

        let w = next.w_inf_norm(1);
        if w > prob.delta {
            let ratio = probe_contraction(map, gamma, &zeta, &diff, prob.s)?;
            if ratio >= 1.0 {
                ratios.push(ratio);
                return Err(Error::NoContraction { ratios });
            }
            return Err(Error::BallExit {
                norm: w,
                radius: prob.delta,
            });
        }
        let floor = 10.0 * prob.tol;
        let tail = &ratios[ratios.len().saturating_sub(DIVERGENCE_WINDOW)..];
        if tail.len() == DIVERGENCE_WINDOW && d > floor && tail.iter().all(|&r| r >= 1.0) {
            return Err(Error::NoContraction { ratios });
        }
        zeta = next;

        if d <= prob.tol {
            let eta = (&zeta - &prob.phi).project_mean_zero();
            let res = residual(&eta, gamma, &prob.phi, &prob.cfg, &DnBackend::default(), prob.s)?;
            if res <= prob.tol || converged_once {
                return Ok(TravelingWaveSolution {
                    eta,
                    gamma,
                    residual: res,
                    contraction_factor: contraction_factor(&trace, floor),
                    iter_trace: trace,
                    backend: map.backend,
                });
            }
            // one more step before accepting a residual above tol
            converged_once = true;
        }
    }
    Err(Error::MaxIterations(prob.max_iter))
}

/// Waves along a sorted list of speeds, each warm-started from the last.
#[derive(Debug, Clone)]
pub struct Continuation {
    pub waves: Vec<TravelingWaveSolution>,
    /// Speeds whose solve failed, with the error.
    pub failures: Vec<(f64, Error)>,
    /// `‖η_{i+1} − η_i‖_{H^s} / |γ_{i+1} − γ_i|` for consecutive waves.
    pub quotients: Vec<f64>,
}

impl Continuation {
    /// Largest quotient; zero for fewer than two waves.
    pub fn lipschitz_estimate(&self) -> f64 {
        self.quotients.iter().cloned().fold(0.0, f64::max)
    }
}

/// Solves for each speed in `gammas`, warm-starting from the previous wave.
pub fn continuation_in_gamma(
    phi: &SurfaceField,
    cfg: &FluidConfig,
    gammas: &[f64],
    backend: &DnBackend,
    delta: Option<f64>,
    tol: f64,
) -> Result<Continuation> {
    let mut prob = TravelingWaveProblem::new(phi.clone(), gammas.first().copied().unwrap_or(0.0), *cfg)?
        .with_tol(tol)?;
    if let Some(d) = delta {
        prob = prob.with_delta(d)?;
    }
    let map = FixedPointMap::new(&prob, backend)?;
    let mut out = Continuation {
        waves: Vec::new(),
        failures: Vec::new(),
        quotients: Vec::new(),
    };
    let mut warm: Option<SurfaceField> = None;
    for &gamma in gammas {
        match solve_with_map(&map, gamma, warm.as_ref()) {
            Ok(sol) => {
                warm = Some(sol.zeta(phi));
                out.waves.push(sol);
            }
            Err(e) => out.failures.push((gamma, e)),
        }
    }
    out.quotients = out
        .waves
        .windows(2)
        .map(|w| hs_norm(&(&w[1].eta - &w[0].eta), prob.s) / (w[1].gamma - w[0].gamma).abs())
        .collect();
    Ok(out)
}
