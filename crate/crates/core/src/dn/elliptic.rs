//! Mapped-coordinate collocation solve for the Dirichlet–Neumann operator.
//!
//! The fluid layer `-h < y < η(x)` is flattened with
//! `y = -h + (z + 1) H(x) / 2`, `H = η + h`, `z ∈ [-1, 1]`. In these
//! coordinates the Laplace equation, multiplied by `H²/4`, reads
//!
//! ```text
//! (1 + (z+1)²|∇η|²/4) ψ_zz + (H²/4) Δ_x ψ − (z+1)(H/2) ∇η·∇_x ψ_z
//!     + (z+1) (2|∇η|² − H Δη)/4 ψ_z = 0
//! ```
//!
//! discretized by Fourier collocation in `x` and Chebyshev–Lobatto
//! collocation in `z`. The top row carries the Dirichlet data, the bottom
//! row `ψ_z = (H/2) R ψ` with `R = 0` for a flat impermeable bottom.
//!
//! Deep fluid is truncated at `y = -D`: only the layer down to
//! `h = ‖η‖_∞ + 1` is mapped, and the flat slab below it is eliminated
//! exactly through the Robin symbol `R(k) = |k| tanh(|k|(D − h))`.
//!
//! The linear system is solved by GMRES preconditioned with the exact
//! inverse of the flat-surface operator, which is block diagonal in Fourier
//! space. At `η = 0` the preconditioner is exact and GMRES stops after one
//! iteration.

use nalgebra::DMatrix;
use num_complex::Complex64;
use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use super::chebyshev::{differentiation_matrices, lobatto_nodes};
use super::{Depth, DnBackend, EllipticSolveReport, FluidConfig};
use crate::error::{Error, Result};
use crate::krylov::{gmres, GmresConfig};
use crate::spectral::{PeriodicGrid, SurfaceField, Transformer};

const STALL_SLACK: f64 = 4.0;
const GMRES_RESTART: usize = 80;
const GMRES_MAX_ITER: usize = 2400;

/// Vertical operators and flat preconditioner blocks for one geometry.
struct VerticalOps {
    levels: usize,
    z: Vec<f64>,
    d1: Vec<f64>,
    d2: Vec<f64>,
    /// Inverse of the flat operator per distinct `|k|²`, row-major `(L-1)²`.
    inverses: Vec<Vec<f64>>,
    mode_to_inverse: Vec<usize>,
}

#[derive(Clone, Copy, PartialEq, Eq, Hash)]
struct OpsKey {
    grid: PeriodicGrid,
    levels: usize,
    layer_bits: u64,
    slab_bits: Option<u64>,
}

fn robin_symbol(ksq: u64, slab: Option<f64>) -> f64 {
    match slab {
        None => 0.0,
        Some(thickness) => {
            let k = (ksq as f64).sqrt();
            k * (k * thickness).tanh()
        }
    }
}

impl VerticalOps {
    fn shared(grid: PeriodicGrid, levels: usize, layer: f64, slab: Option<f64>) -> Result<Arc<Self>> {
        static CACHE: OnceLock<Mutex<HashMap<OpsKey, Arc<VerticalOps>>>> = OnceLock::new();
        let key = OpsKey {
            grid,
            levels,
            layer_bits: layer.to_bits(),
            slab_bits: slab.map(f64::to_bits),
        };
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        if let Some(ops) = cache.lock().expect("ops cache poisoned").get(&key) {
            return Ok(ops.clone());
        }
        let ops = Arc::new(Self::build(grid, levels, layer, slab)?);
        let mut guard = cache.lock().expect("ops cache poisoned");
        // surfaces with many distinct depths would otherwise grow this without bound
        if guard.len() > 64 {
            guard.clear();
        }
        guard.insert(key, ops.clone());
        Ok(ops)
    }

    fn build(grid: PeriodicGrid, levels: usize, layer: f64, slab: Option<f64>) -> Result<Self> {
        let z = lobatto_nodes(levels);
        let (d1, d2) = differentiation_matrices(levels);
        let m = levels - 1;

        let mut by_ksq: HashMap<u64, usize> = HashMap::new();
        let mut inverses = Vec::new();
        let mut mode_to_inverse = vec![0; grid.len()];
        for (idx, slot) in mode_to_inverse.iter_mut().enumerate() {
            let ksq = grid.wavenumber_sq(idx);
            if let Some(&pos) = by_ksq.get(&ksq) {
                *slot = pos;
                continue;
            }
            let mut p = DMatrix::<f64>::zeros(m, m);
            for r in 0..m {
                let i = r + 1;
                let (src, shift) = if i < levels - 1 {
                    (&d2, layer * layer / 4.0 * ksq as f64)
                } else {
                    (&d1, layer / 2.0 * robin_symbol(ksq, slab))
                };
                for c in 0..m {
                    p[(r, c)] = src[i * levels + c + 1];
                }
                p[(r, r)] -= shift;
            }
            let inv = p.try_inverse().ok_or_else(|| {
                Error::InvalidParameter(format!("flat collocation block singular at |k|² = {ksq}"))
            })?;
            let mut flat = vec![0.0; m * m];
            for r in 0..m {
                for c in 0..m {
                    flat[r * m + c] = inv[(r, c)];
                }
            }
            let pos = inverses.len();
            inverses.push(flat);
            by_ksq.insert(ksq, pos);
            *slot = pos;
        }
        Ok(Self {
            levels,
            z,
            d1,
            d2,
            inverses,
            mode_to_inverse,
        })
    }
}

/// Elliptic DN solver prepared for one surface.
pub struct MappedElliptic {
    grid: PeriodicGrid,
    tol: f64,
    backend: DnBackend,
    ops: Arc<VerticalOps>,
    depth: Vec<f64>,
    grad_eta: Vec<Vec<f64>>,
    grad_sq: Vec<f64>,
    curvature: Vec<f64>,
    robin: Option<Vec<f64>>,
    ksq: Vec<f64>,
    /// `k_j` per mode with the Nyquist bin zeroed.
    kvec: Vec<Vec<f64>>,
}

struct Workspace {
    tf: Transformer,
    psi: Vec<f64>,
    psi_z: Vec<f64>,
    psi_zz: Vec<f64>,
    lap: Vec<f64>,
    grad: Vec<Vec<f64>>,
    grad_z: Vec<Vec<f64>>,
    bottom_robin: Vec<f64>,
    spec: Vec<Complex64>,
    tmp: Vec<Complex64>,
    spectra: Vec<Complex64>,
    column: Vec<Complex64>,
}

/// `out = A · x` for square `a` (levels × levels) and level-major `x` (levels × cols).
fn level_matmul(a: &[f64], levels: usize, x: &[f64], cols: usize, out: &mut [f64]) {
    out.iter_mut().for_each(|v| *v = 0.0);
    for i in 0..levels {
        let row = &mut out[i * cols..(i + 1) * cols];
        for l in 0..levels {
            let ail = a[i * levels + l];
            let src = &x[l * cols..(l + 1) * cols];
            for (o, s) in row.iter_mut().zip(src) {
                *o += ail * s;
            }
        }
    }
}

impl MappedElliptic {
    pub fn new(eta: &SurfaceField, cfg: &FluidConfig, vertical_points: usize, solver_tol: f64) -> Result<Self> {
        let backend = DnBackend::elliptic(vertical_points, solver_tol);
        backend.validate()?;
        cfg.check_admissible(eta)?;
        let grid = cfg.grid;
        let (layer, slab) = match cfg.depth {
            Depth::Finite { b } => (b, None),
            Depth::Infinite { truncation_depth } => {
                let h = eta.sup_norm() + 1.0;
                (h, Some(truncation_depth - h))
            }
        };
        let ops = VerticalOps::shared(grid, vertical_points, layer, slab)?;

        let depth: Vec<f64> = eta.values().iter().map(|v| v + layer).collect();
        let grad: Vec<SurfaceField> = eta.gradient();
        let grad_eta: Vec<Vec<f64>> = grad.iter().map(|f| f.values().to_vec()).collect();
        let grad_sq: Vec<f64> = (0..grid.len())
            .map(|x| grad_eta.iter().map(|g| g[x] * g[x]).sum())
            .collect();
        let lap = eta.laplacian();
        let curvature = (0..grid.len())
            .map(|x| (2.0 * grad_sq[x] - depth[x] * lap.values()[x]) / 4.0)
            .collect();
        let robin = slab.map(|t| {
            (0..grid.len())
                .map(|idx| robin_symbol(grid.wavenumber_sq(idx), Some(t)))
                .collect()
        });
        let ksq = (0..grid.len()).map(|idx| grid.wavenumber_sq(idx) as f64).collect();
        let kvec = (0..grid.dim())
            .map(|j| {
                (0..grid.len())
                    .map(|idx| {
                        if grid.is_nyquist(idx) && grid.wavevector(idx)[j] == -((grid.n() / 2) as i64) {
                            0.0
                        } else {
                            grid.wavevector(idx)[j] as f64
                        }
                    })
                    .collect()
            })
            .collect();
        Ok(Self {
            grid,
            tol: solver_tol,
            backend,
            ops,
            depth,
            grad_eta,
            grad_sq,
            curvature,
            robin,
            ksq,
            kvec,
        })
    }

    /// Number of unknowns in the collocation system.
    pub fn unknowns(&self) -> usize {
        (self.ops.levels - 1) * self.grid.len()
    }

    fn workspace(&self) -> Workspace {
        let n = self.grid.len();
        let l = self.ops.levels;
        let d = self.grid.dim();
        Workspace {
            tf: Transformer::new(self.grid),
            psi: vec![0.0; l * n],
            psi_z: vec![0.0; l * n],
            psi_zz: vec![0.0; l * n],
            lap: vec![0.0; l * n],
            grad: vec![vec![0.0; l * n]; d],
            grad_z: vec![vec![0.0; l * n]; d],
            bottom_robin: vec![0.0; n],
            spec: vec![Complex64::new(0.0, 0.0); n],
            tmp: vec![Complex64::new(0.0, 0.0); n],
            spectra: vec![Complex64::new(0.0, 0.0); (l - 1) * n],
            column: vec![Complex64::new(0.0, 0.0); l - 1],
        }
    }

    /// Fills `ws.psi` from the top data and interior/bottom unknowns, then
    /// computes all vertical and horizontal derivatives.
    fn differentiate(&self, top: &[f64], unknowns: &[f64], ws: &mut Workspace) {
        let n = self.grid.len();
        let levels = self.ops.levels;
        let dim = self.grid.dim();
        ws.psi[..n].copy_from_slice(top);
        ws.psi[n..].copy_from_slice(unknowns);
        level_matmul(&self.ops.d1, levels, &ws.psi, n, &mut ws.psi_z);
        level_matmul(&self.ops.d2, levels, &ws.psi, n, &mut ws.psi_zz);

        for lvl in 0..levels {
            let row = &ws.psi[lvl * n..(lvl + 1) * n];
            ws.tf.forward_real(row, &mut ws.spec);
            if lvl > 0 && lvl < levels - 1 {
                for ((t, s), ksq) in ws.tmp.iter_mut().zip(&ws.spec).zip(&self.ksq) {
                    *t = -s * ksq;
                }
                let out = &mut ws.lap[lvl * n..(lvl + 1) * n];
                ws.tf.inverse_real(&mut ws.tmp, out);
            }
            if lvl == levels - 1 {
                if let Some(robin) = &self.robin {
                    for ((t, s), r) in ws.tmp.iter_mut().zip(&ws.spec).zip(robin) {
                        *t = s * r;
                    }
                    ws.tf.inverse_real(&mut ws.tmp, &mut ws.bottom_robin);
                }
            }
            for j in 0..dim {
                for ((t, s), k) in ws.tmp.iter_mut().zip(&ws.spec).zip(&self.kvec[j]) {
                    *t = Complex64::new(-s.im * k, s.re * k);
                }
                let out = &mut ws.grad[j][lvl * n..(lvl + 1) * n];
                ws.tf.inverse_real(&mut ws.tmp, out);
            }
        }
        for j in 0..dim {
            level_matmul(&self.ops.d1, levels, &ws.grad[j], n, &mut ws.grad_z[j]);
        }
    }

    /// Collocation residual of the mapped Laplace problem.
    fn apply(&self, top: &[f64], unknowns: &[f64], out: &mut [f64], ws: &mut Workspace) {
        self.differentiate(top, unknowns, ws);
        let n = self.grid.len();
        let levels = self.ops.levels;
        for lvl in 1..levels {
            let row = &mut out[(lvl - 1) * n..lvl * n];
            let base = lvl * n;
            if lvl == levels - 1 {
                for x in 0..n {
                    let mut v = ws.psi_z[base + x];
                    if self.robin.is_some() {
                        v -= 0.5 * self.depth[x] * ws.bottom_robin[x];
                    }
                    row[x] = v;
                }
                continue;
            }
            let zp1 = self.ops.z[lvl] + 1.0;
            for x in 0..n {
                let h = self.depth[x];
                let mut cross = 0.0;
                for (gj, gzj) in self.grad_eta.iter().zip(&ws.grad_z) {
                    cross += gj[x] * gzj[base + x];
                }
                let a = 1.0 + 0.25 * zp1 * zp1 * self.grad_sq[x];
                row[x] = a * ws.psi_zz[base + x] + 0.25 * h * h * ws.lap[base + x]
                    - 0.5 * zp1 * h * cross
                    + zp1 * self.curvature[x] * ws.psi_z[base + x];
            }
        }
    }

    /// Flat-surface inverse applied level by level in Fourier space.
    fn precondition(&self, r: &[f64], z: &mut [f64], ws: &mut Workspace) {
        let n = self.grid.len();
        let m = self.ops.levels - 1;
        for lvl in 0..m {
            let src = &r[lvl * n..(lvl + 1) * n];
            ws.tf.forward_real(src, &mut ws.spec);
            ws.spectra[lvl * n..(lvl + 1) * n].copy_from_slice(&ws.spec);
        }
        for idx in 0..n {
            let inv = &self.ops.inverses[self.ops.mode_to_inverse[idx]];
            for (lvl, c) in ws.column.iter_mut().enumerate() {
                *c = ws.spectra[lvl * n + idx];
            }
            for row in 0..m {
                let coeffs = &inv[row * m..(row + 1) * m];
                let mut acc = Complex64::new(0.0, 0.0);
                for (a, c) in coeffs.iter().zip(&ws.column) {
                    acc += c * *a;
                }
                ws.spectra[row * n + idx] = acc;
            }
        }
        for lvl in 0..m {
            ws.spec.copy_from_slice(&ws.spectra[lvl * n..(lvl + 1) * n]);
            let dst = &mut z[lvl * n..(lvl + 1) * n];
            ws.tf.inverse_real(&mut ws.spec, dst);
        }
    }

    /// Solves for the harmonic extension of `g` and returns `G[η]g`
    /// (not mean-projected) with the solve report.
    pub fn solve(&self, g: &SurfaceField) -> Result<(SurfaceField, EllipticSolveReport)> {
        let (out, report, _) = self.solve_with_guess(g, None)?;
        Ok((out, report))
    }

    /// Like [`MappedElliptic::solve`], starting GMRES from `guess` and also
    /// returning the interior solution for reuse as a later guess.
    pub fn solve_with_guess(
        &self,
        g: &SurfaceField,
        guess: Option<&[f64]>,
    ) -> Result<(SurfaceField, EllipticSolveReport, Vec<f64>)> {
        if g.grid() != self.grid {
            return Err(Error::GridMismatch);
        }
        let n = self.grid.len();
        let len = self.unknowns();
        let zeros_top = vec![0.0; n];

        // Unknowns are ψ − g on the interior levels. The vertically constant
        // lift is annihilated by D exactly, so the right-hand side scales
        // with g rather than with the large entries of D².
        let lift: Vec<f64> = g.values().iter().copied().cycle().take(len).collect();
        let mut ws_a = self.workspace();
        let mut ws_p = self.workspace();
        // Left preconditioning by the flat block inverse: the residual then
        // measures the relative error of the interior solution.
        let mut raw = vec![0.0; len];
        self.apply(g.values(), &lift, &mut raw, &mut ws_a);
        raw.iter_mut().for_each(|v| *v = -*v);
        let mut rhs = vec![0.0; len];
        self.precondition(&raw, &mut rhs, &mut ws_p);

        let mut x = match guess {
            Some(u) if u.len() == len => u.iter().zip(&lift).map(|(a, b)| a - b).collect(),
            _ => vec![0.0; len],
        };
        let cfg = GmresConfig {
            restart: GMRES_RESTART,
            max_iter: GMRES_MAX_ITER,
            tol: self.tol,
        };
        let outcome = gmres::<std::convert::Infallible>(
            |u, out| {
                self.apply(&zeros_top, u, &mut raw, &mut ws_a);
                self.precondition(&raw, out, &mut ws_p);
                Ok(())
            },
            |r, z| {
                z.copy_from_slice(r);
                Ok(())
            },
            &rhs,
            &mut x,
            &cfg,
        )
        .unwrap_or_else(|never| match never {});
        x.iter_mut().zip(&lift).for_each(|(a, b)| *a += b);
        // a stall within a small factor of the target is the round-off floor
        if !outcome.converged && outcome.residual > STALL_SLACK * self.tol {
            return Err(Error::SolverStalled {
                iterations: outcome.iterations,
                residual: outcome.residual,
            });
        }

        // ψ_z on the surface from the top row of D·Ψ
        let levels = self.ops.levels;
        let mut psi = vec![0.0; levels * n];
        psi[..n].copy_from_slice(g.values());
        psi[n..].copy_from_slice(&x);
        let mut top_z = vec![0.0; n];
        for l in 0..levels {
            let d = self.ops.d1[l];
            for (t, p) in top_z.iter_mut().zip(&psi[l * n..(l + 1) * n]) {
                *t += d * p;
            }
        }
        let grad_g = g.gradient();
        let values = (0..n)
            .map(|x| {
                let mut tangential = 0.0;
                for (ge, gg) in self.grad_eta.iter().zip(&grad_g) {
                    tangential += ge[x] * gg.values()[x];
                }
                2.0 / self.depth[x] * (1.0 + self.grad_sq[x]) * top_z[x] - tangential
            })
            .collect();
        let report = EllipticSolveReport {
            iterations: outcome.iterations,
            residual: outcome.residual,
            backend: self.backend,
        };
        Ok((SurfaceField::from_values(self.grid, values), report, x))
    }
}

/// `G[η]g` by the mapped elliptic solve, without the final mean projection.
pub fn dn_elliptic(
    eta: &SurfaceField,
    g: &SurfaceField,
    cfg: &FluidConfig,
    vertical_points: usize,
    solver_tol: f64,
) -> Result<(SurfaceField, EllipticSolveReport)> {
    MappedElliptic::new(eta, cfg, vertical_points, solver_tol)?.solve(g)
}
