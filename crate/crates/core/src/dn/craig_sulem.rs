//! Craig–Sulem series `G[η] = Σ_j G_j(η)` in powers of the surface.
//!
//! Expanding the identity satisfied by the harmonic functions
//! `e^{ik·x} cosh(|k|(y + b))` on `y = η` in powers of `η` gives, with
//! `T = tanh(b|D|)` (`T = 1` in deep water),
//!
//! ```text
//! S_m  = |D|^m      (m even),   |D|^m T       (m odd)
//! S'_m = |D|^{m+1} T (m even),  |D|^{m+1}     (m odd)
//! G_0 q = S'_0 q
//! G_j q = (η^j/j!) S'_j q − ∇(η^j/j!)·∇(S_{j-1} q) − Σ_{m=1..j} G_{j-m}[(η^m/m!) S_m q]
//! ```

use super::{DnOperator, FluidConfig};
use crate::dn::DnBackend;
use crate::error::{Error, Result};
use crate::spectral::{DealiasRule, SurfaceField};

struct Series<'a> {
    cfg: &'a FluidConfig,
    rule: DealiasRule,
    /// `η^m / m!`, index `m`.
    powers: Vec<SurfaceField>,
    /// `∇(η^m / m!)`, index `m`.
    power_grads: Vec<Vec<SurfaceField>>,
}

impl Series<'_> {
    fn tanh_factor(&self, kabs: f64) -> f64 {
        match self.cfg.finite_depth() {
            Some(b) => (b * kabs).tanh(),
            None => 1.0,
        }
    }

    fn s(&self, m: usize, q: &SurfaceField) -> SurfaceField {
        q.apply_real_multiplier(|k| {
            let kabs = ((k[0] * k[0] + k[1] * k[1]) as f64).sqrt();
            let t = if m % 2 == 1 { self.tanh_factor(kabs) } else { 1.0 };
            kabs.powi(m as i32) * t
        })
    }

    fn s_prime(&self, m: usize, q: &SurfaceField) -> SurfaceField {
        q.apply_real_multiplier(|k| {
            let kabs = ((k[0] * k[0] + k[1] * k[1]) as f64).sqrt();
            let t = if m % 2 == 0 { self.tanh_factor(kabs) } else { 1.0 };
            kabs.powi(m as i32 + 1) * t
        })
    }

    fn term(&self, j: usize, q: &SurfaceField) -> SurfaceField {
        if j == 0 {
            return self.s_prime(0, q);
        }
        let mut out = self.powers[j].product(&self.s_prime(j, q), self.rule);
        let grad_s = self.s(j - 1, q).gradient();
        for (pg, gs) in self.power_grads[j].iter().zip(&grad_s) {
            out = out.axpy(1.0, &pg.product(gs, self.rule).scale(-1.0));
        }
        for m in 1..=j {
            let inner = self.powers[m].product(&self.s(m, q), self.rule);
            out = self.term(j - m, &inner).scale(-1.0).axpy(1.0, &out);
        }
        out
    }
}

/// Sum of the series through degree `order`, without mean projection.
pub(crate) fn series(
    eta: &SurfaceField,
    g: &SurfaceField,
    cfg: &FluidConfig,
    order: usize,
    rule: DealiasRule,
) -> Result<SurfaceField> {
    let mut powers = vec![SurfaceField::constant(eta.grid(), 1.0)];
    for m in 1..=order {
        let next = powers[m - 1].product(eta, rule).scale(1.0 / m as f64);
        powers.push(next);
    }
    let power_grads = powers.iter().map(|p| p.gradient()).collect();
    let series = Series {
        cfg,
        rule,
        powers,
        power_grads,
    };

    let mut total = SurfaceField::zeros(eta.grid());
    let mut norms: Vec<f64> = Vec::with_capacity(order + 1);
    let mut growth_run = Vec::new();
    for j in 0..=order {
        let t = series.term(j, g);
        let nj = t.l2_norm();
        if let Some(&prev) = norms.last() {
            if nj > prev && prev > 0.0 {
                growth_run.push(j);
                if growth_run.len() >= 3 {
                    return Err(Error::SeriesDiverging { orders: growth_run });
                }
            } else {
                growth_run.clear();
            }
        }
        norms.push(nj);
        total = total.axpy(1.0, &t);
    }
    Ok(total)
}

/// `G[η]g` from the order-`order` Craig–Sulem series, projected to mean zero.
pub fn dn_craig_sulem(
    eta: &SurfaceField,
    g: &SurfaceField,
    cfg: &FluidConfig,
    order: usize,
) -> Result<SurfaceField> {
    DnOperator::new(eta, cfg, &DnBackend::craig_sulem(order))?.apply(g)
}
