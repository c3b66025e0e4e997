//! Restarted, right-preconditioned GMRES on real vectors.
//!
//! The operator and preconditioner are closures so callers can wrap
//! matrix-free spectral operators. Preconditioned directions are kept
//! (flexible variant), so the preconditioner may itself be inexact.

/// GMRES configuration.
#[derive(Debug, Clone, Copy)]
pub struct GmresConfig {
    /// Krylov dimension before restart.
    pub restart: usize,
    /// Total iteration cap across restarts.
    pub max_iter: usize,
    /// Target `‖b − A x‖ ≤ tol · ‖b‖`.
    pub tol: f64,
}

impl Default for GmresConfig {
    fn default() -> Self {
        Self {
            restart: 60,
            max_iter: 1200,
            tol: 1e-12,
        }
    }
}

/// Result of a GMRES solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GmresOutcome {
    pub iterations: usize,
    /// Relative true residual `‖b − A x‖ / ‖b‖` at exit.
    pub residual: f64,
    pub converged: bool,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Solves `A x = b` starting from the contents of `x`.
pub fn gmres<E>(
    mut apply: impl FnMut(&[f64], &mut [f64]) -> Result<(), E>,
    mut precondition: impl FnMut(&[f64], &mut [f64]) -> Result<(), E>,
    b: &[f64],
    x: &mut [f64],
    cfg: &GmresConfig,
) -> Result<GmresOutcome, E> {
    let len = b.len();
    let b_norm = norm(b);
    if b_norm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return Ok(GmresOutcome {
            iterations: 0,
            residual: 0.0,
            converged: true,
        });
    }
    let m = cfg.restart.max(1);
    let target = cfg.tol * b_norm;

    let mut r = vec![0.0; len];
    let mut w = vec![0.0; len];
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(m + 1);
    let mut directions: Vec<Vec<f64>> = Vec::with_capacity(m);
    let mut hess = vec![vec![0.0; m]; m + 1];
    let mut cs = vec![0.0; m];
    let mut sn = vec![0.0; m];
    let mut g = vec![0.0; m + 1];

    let mut iterations = 0;
    let mut previous_cycle = f64::INFINITY;
    loop {
        apply(x, &mut r)?;
        for (ri, bi) in r.iter_mut().zip(b) {
            *ri = bi - *ri;
        }
        let beta = norm(&r);
        let rel = beta / b_norm;
        if beta <= target {
            return Ok(GmresOutcome {
                iterations,
                residual: rel,
                converged: true,
            });
        }
        // give up when out of budget or a whole cycle made no real progress
        if iterations >= cfg.max_iter || beta > 0.9 * previous_cycle {
            return Ok(GmresOutcome {
                iterations,
                residual: rel,
                converged: false,
            });
        }
        previous_cycle = beta;

        basis.clear();
        directions.clear();
        basis.push(r.iter().map(|v| v / beta).collect());
        g.iter_mut().for_each(|v| *v = 0.0);
        g[0] = beta;

        let mut k_used = 0;
        for j in 0..m {
            let mut z = vec![0.0; len];
            precondition(&basis[j], &mut z)?;
            apply(&z, &mut w)?;
            directions.push(z);
            iterations += 1;

            // modified Gram-Schmidt, twice
            for col in hess.iter_mut() {
                col[j] = 0.0;
            }
            for _ in 0..2 {
                for (i, v) in basis.iter().enumerate() {
                    let h = dot(&w, v);
                    hess[i][j] += h;
                    for (wk, vk) in w.iter_mut().zip(v) {
                        *wk -= h * vk;
                    }
                }
            }
            let h_next = norm(&w);
            hess[j + 1][j] = h_next;

            for i in 0..j {
                let t = cs[i] * hess[i][j] + sn[i] * hess[i + 1][j];
                hess[i + 1][j] = -sn[i] * hess[i][j] + cs[i] * hess[i + 1][j];
                hess[i][j] = t;
            }
            let denom = hess[j][j].hypot(hess[j + 1][j]);
            if denom == 0.0 {
                cs[j] = 1.0;
                sn[j] = 0.0;
            } else {
                cs[j] = hess[j][j] / denom;
                sn[j] = hess[j + 1][j] / denom;
            }
            hess[j][j] = denom;
            hess[j + 1][j] = 0.0;
            g[j + 1] = -sn[j] * g[j];
            g[j] *= cs[j];
            k_used = j + 1;

            if g[j + 1].abs() <= target || h_next == 0.0 || iterations >= cfg.max_iter {
                break;
            }
            basis.push(w.iter().map(|v| v / h_next).collect());
        }

        // back substitution on the triangular factor
        let mut y = vec![0.0; k_used];
        for i in (0..k_used).rev() {
            let mut acc = g[i];
            for (l, yl) in y.iter().enumerate().take(k_used).skip(i + 1) {
                acc -= hess[i][l] * yl;
            }
            y[i] = acc / hess[i][i];
        }
        for (yi, z) in y.iter().zip(&directions) {
            for (xk, zk) in x.iter_mut().zip(z) {
                *xk += yi * zk;
            }
        }
    }
}
