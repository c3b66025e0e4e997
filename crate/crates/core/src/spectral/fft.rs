//! FFT plumbing on top of `rustfft`.
//!
//! Forward transforms are normalized by `1/n^d` so that coefficients obey
//! Parseval with unit weight against the mean-square norm; inverse
//! transforms are plain synthesis sums.

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use super::grid::PeriodicGrid;

type Plan = Arc<dyn Fft<f64>>;

fn plan(n: usize, forward: bool) -> Plan {
    static PLANS: OnceLock<Mutex<(FftPlanner<f64>, HashMap<(usize, bool), Plan>)>> =
        OnceLock::new();
    let cache = PLANS.get_or_init(|| Mutex::new((FftPlanner::new(), HashMap::new())));
    let mut guard = cache.lock().expect("fft plan cache poisoned");
    let (planner, plans) = &mut *guard;
    plans
        .entry((n, forward))
        .or_insert_with(|| {
            if forward {
                planner.plan_fft_forward(n)
            } else {
                planner.plan_fft_inverse(n)
            }
        })
        .clone()
}

/// Reusable transform workspace for one grid. Not `Sync`; create one per thread.
pub struct Transformer {
    grid: PeriodicGrid,
    forward: Plan,
    inverse: Plan,
    scratch: Vec<Complex64>,
    column: Vec<Complex64>,
}

impl Transformer {
    pub fn new(grid: PeriodicGrid) -> Self {
        let n = grid.n();
        let forward = plan(n, true);
        let inverse = plan(n, false);
        let scratch_len = forward
            .get_inplace_scratch_len()
            .max(inverse.get_inplace_scratch_len());
        Self {
            grid,
            forward,
            inverse,
            scratch: vec![Complex64::new(0.0, 0.0); scratch_len],
            column: vec![Complex64::new(0.0, 0.0); n],
        }
    }

    pub fn grid(&self) -> PeriodicGrid {
        self.grid
    }

    /// In-place normalized forward transform of `n^d` samples.
    pub fn forward(&mut self, buf: &mut [Complex64]) {
        let fft = self.forward.clone();
        self.apply(&*fft, buf);
        let scale = 1.0 / self.grid.len() as f64;
        for c in buf.iter_mut() {
            *c *= scale;
        }
    }

    /// In-place inverse (synthesis) transform.
    pub fn inverse(&mut self, buf: &mut [Complex64]) {
        let fft = self.inverse.clone();
        self.apply(&*fft, buf);
    }

    /// Forward transform of real samples into `out`.
    pub fn forward_real(&mut self, values: &[f64], out: &mut [Complex64]) {
        for (o, &v) in out.iter_mut().zip(values) {
            *o = Complex64::new(v, 0.0);
        }
        self.forward(out);
    }

    /// Inverse transform keeping the real part, written into `out`.
    /// `buf` is consumed as workspace.
    pub fn inverse_real(&mut self, buf: &mut [Complex64], out: &mut [f64]) {
        self.inverse(buf);
        for (o, c) in out.iter_mut().zip(buf.iter()) {
            *o = c.re;
        }
    }

    fn apply(&mut self, fft: &dyn Fft<f64>, buf: &mut [Complex64]) {
        let n = self.grid.n();
        debug_assert_eq!(buf.len(), self.grid.len());
        match self.grid.dim() {
            1 => fft.process_with_scratch(buf, &mut self.scratch),
            _ => {
                // rows (axis 2, contiguous)
                for row in buf.chunks_exact_mut(n) {
                    fft.process_with_scratch(row, &mut self.scratch);
                }
                // columns (axis 1, stride n)
                for j in 0..n {
                    for i in 0..n {
                        self.column[i] = buf[i * n + j];
                    }
                    fft.process_with_scratch(&mut self.column, &mut self.scratch);
                    for i in 0..n {
                        buf[i * n + j] = self.column[i];
                    }
                }
            }
        }
    }
}
