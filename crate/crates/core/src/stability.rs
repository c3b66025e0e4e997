//! Perturbations of traveling waves: the nonlinear remainder, decay runs
//! with exponential fits, amplitude scans and the linearized flow.
//!
//! With `η = η* + f` the perturbation obeys
//!
//! ```text
//! ∂_t f = γ∂₁f − G[η*]f + N(f),
//! N(f)  = {G[η*]f − G[f+η*]f} + {G[η*](η*+φ) − G[f+η*](η*+φ)}
//! ```
//!
//! up to the wave residual `γ∂₁η* − G[η*](η*+φ)`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dn::{DnBackend, DnOperator, FluidConfig};
use crate::error::{Error, Result};
use crate::evolution::{self, EvolutionProblem, LinearFlow, LinearProblem, Record, SchemeConfig};
use crate::spectral::random::{random_field, FieldSpec};
use crate::spectral::{hs_norm, PeriodicGrid, SurfaceField};
use crate::traveling_wave::TravelingWaveSolution;

/// Relative solver accuracy assumed for backends without a tolerance.
const MACHINE_FLOOR: f64 = 1e-14;

/// `N(f)`, mean-zero.
pub fn nonlinear_remainder(
    f: &SurfaceField,
    eta_star: &SurfaceField,
    phi: &SurfaceField,
    cfg: &FluidConfig,
    backend: &DnBackend,
) -> Result<SurfaceField> {
    let mean = f.mean();
    if mean.abs() > 1e-12 * f.l2_norm().max(f64::MIN_POSITIVE) && mean != 0.0 {
        return Err(Error::MeanNotZero { mean });
    }
    let base = DnOperator::new(eta_star, cfg, backend)?;
    let moved = DnOperator::new(&(f + eta_star), cfg, backend)?;
    let zeta = eta_star + phi;
    let first = &base.apply(f)? - &moved.apply(f)?;
    let second = &base.apply(&zeta)? - &moved.apply(&zeta)?;
    Ok((&first + &second).project_mean_zero())
}

/// Outcome of a decay fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Decayed,
    NotDecayed,
    Inconclusive,
}

/// Portion of a run used for the log-linear fit and the verdict thresholds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitWindow {
    /// Samples before `start_fraction · T` are transient.
    pub start_fraction: f64,
    pub end_fraction: f64,
    /// The window closes at the first sample below `floor_factor · floor`.
    pub floor_factor: f64,
    pub min_r2: f64,
    /// Fewer usable samples than this make the verdict inconclusive.
    pub min_samples: usize,
    /// Minimum usable fraction of the window length.
    pub min_coverage: f64,
}

impl Default for FitWindow {
    fn default() -> Self {
        Self {
            start_fraction: 0.1,
            end_fraction: 1.0,
            floor_factor: 100.0,
            min_r2: 0.99,
            min_samples: 5,
            min_coverage: 0.25,
        }
    }
}

impl FitWindow {
    pub fn validate(&self) -> Result<()> {
        if !(0.0 <= self.start_fraction && self.start_fraction < self.end_fraction && self.end_fraction <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "fit window [{}, {}] is not a subinterval of [0, 1]",
                self.start_fraction, self.end_fraction
            )));
        }
        if self.min_samples < 2 {
            return Err(Error::InvalidParameter("a fit needs at least two samples".into()));
        }
        Ok(())
    }
}

/// Least-squares fit of `ln ‖f(t)‖ = ln(C₀‖f₀‖) − c₀ t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub c0: f64,
    /// `C₀`, the prefactor relative to `‖f₀‖`.
    pub prefactor: f64,
    pub r2: f64,
    /// Times of the first and last samples used.
    pub t_start: f64,
    pub t_end: f64,
    pub samples: usize,
    pub verdict: Verdict,
}

/// Fits the decay of `norms` sampled at `times` over `[0, horizon]`.
pub fn fit_decay(
    times: &[f64],
    norms: &[f64],
    horizon: f64,
    initial_norm: f64,
    floor: f64,
    window: &FitWindow,
) -> DecayFit {
    let lo = window.start_fraction * horizon;
    let hi = window.end_fraction * horizon;
    let threshold = window.floor_factor * floor;
    let mut pts = Vec::new();
    for (&t, &v) in times.iter().zip(norms) {
        if t < lo - 1e-12 * horizon || t > hi + 1e-12 * horizon {
            continue;
        }
        if !(v > threshold) || !v.is_finite() {
            break;
        }
        pts.push((t, v.ln()));
    }
    let m = pts.len();
    let (c0, intercept, r2) = if m >= 2 {
        let mt = pts.iter().map(|p| p.0).sum::<f64>() / m as f64;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / m as f64;
        let stt: f64 = pts.iter().map(|p| (p.0 - mt).powi(2)).sum();
        let sty: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - my)).sum();
        let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
        let slope = sty / stt;
        let ss_res: f64 = pts.iter().map(|p| (p.1 - my - slope * (p.0 - mt)).powi(2)).sum();
        let r2 = if syy > 0.0 { 1.0 - ss_res / syy } else { 0.0 };
        (-slope, my - slope * mt, r2)
    } else {
        (f64::NAN, f64::NAN, f64::NAN)
    };
    let (t_start, t_end) = match (pts.first(), pts.last()) {
        (Some(a), Some(b)) => (a.0, b.0),
        _ => (f64::NAN, f64::NAN),
    };
    let coverage = if m >= 2 { (t_end - t_start) / (hi - lo) } else { 0.0 };
    let verdict = if !(initial_norm > 0.0) || m < window.min_samples || coverage < window.min_coverage {
        Verdict::Inconclusive
    } else if c0 > 0.0 && r2 >= window.min_r2 {
        Verdict::Decayed
    } else {
        Verdict::NotDecayed
    };
    DecayFit {
        c0,
        prefactor: intercept.exp() / initial_norm,
        r2,
        t_start,
        t_end,
        samples: m,
        verdict,
    }
}

/// Accuracy floor of `‖·‖_{H^s}` for a run whose DN data have size `scale`
/// in `L²`: the relative solver accuracy carried to the highest resolved
/// mode.
pub fn roundoff_floor(backend: &DnBackend, grid: PeriodicGrid, s: f64, scale: f64) -> f64 {
    let rel = match *backend {
        DnBackend::MappedElliptic { solver_tol, .. } => solver_tol,
        _ => MACHINE_FLOOR,
    };
    let kmax = (grid.n() / 2) as f64;
    rel * (1.0 + kmax * kmax).powf(s / 2.0) * scale
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModeAmplitude {
    pub k: [i64; 2],
    pub cos: f64,
    pub sin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum PerturbationShape {
    /// `Σ cos·cos(k·x) + sin·sin(k·x)`, scaled by the amplitude.
    Modes { modes: Vec<ModeAmplitude> },
    /// Seeded smooth field on `1 ≤ |k|_∞ ≤ kmax`, scaled to sup norm equal
    /// to the amplitude.
    Random { seed: u64, kmax: i64 },
}

/// Initial perturbation `f₀`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbationSpec {
    pub shape: PerturbationShape,
    pub amplitude: f64,
    pub s: f64,
}

impl PerturbationSpec {
    /// Unit cosines on the modes `k₁ ∈ ks`, scaled by `amplitude`.
    pub fn cosines(ks: &[i64], amplitude: f64) -> Self {
        let modes = ks
            .iter()
            .map(|&k| ModeAmplitude {
                k: [k, 0],
                cos: 1.0,
                sin: 0.0,
            })
            .collect();
        Self {
            shape: PerturbationShape::Modes { modes },
            amplitude,
            s: evolution::DEFAULT_MONITOR_S,
        }
    }

    pub fn random(seed: u64, kmax: i64, amplitude: f64) -> Self {
        Self {
            shape: PerturbationShape::Random { seed, kmax },
            amplitude,
            s: evolution::DEFAULT_MONITOR_S,
        }
    }

    pub fn with_amplitude(&self, amplitude: f64) -> Self {
        Self {
            amplitude,
            ..self.clone()
        }
    }

    pub fn build(&self, grid: PeriodicGrid) -> Result<SurfaceField> {
        if !(self.amplitude >= 0.0 && self.amplitude.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "amplitude {} must be nonnegative",
                self.amplitude
            )));
        }
        let unit = match &self.shape {
            PerturbationShape::Modes { modes } => {
                let mut f = SurfaceField::zeros(grid);
                for m in modes {
                    if m.k == [0, 0] {
                        return Err(Error::InvalidParameter("perturbation modes must be nonzero".into()));
                    }
                    f = &f + &SurfaceField::mode(grid, m.k, m.cos, m.sin);
                }
                f
            }
            PerturbationShape::Random { seed, kmax } => {
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                let f = random_field(grid, &FieldSpec::smooth(*kmax), &mut rng);
                let sup = f.sup_norm();
                if sup == 0.0 {
                    f
                } else {
                    f.scale(1.0 / sup)
                }
            }
        };
        Ok(unit.scale(self.amplitude).project_mean_zero())
    }
}

/// Default admission threshold `1e−2 ‖η*‖_{H^s} + 1e−3` for amplitudes.
pub fn admission_threshold(eta_star: &SurfaceField, s: f64) -> f64 {
    1e-2 * hs_norm(eta_star, s) + 1e-3
}

/// Horizon, sampling and fit settings shared by decay runs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayOptions {
    pub horizon: f64,
    pub record_every: usize,
    pub window: FitWindow,
    /// Overrides [`admission_threshold`].
    pub admission: Option<f64>,
}

impl DecayOptions {
    pub fn new(horizon: f64) -> Self {
        Self {
            horizon,
            record_every: 1,
            window: FitWindow::default(),
            admission: None,
        }
    }

    pub fn with_record_every(mut self, every: usize) -> Self {
        self.record_every = every;
        self
    }
}

/// Identifies the wave a report refers to.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WaveMeta {
    pub gamma: f64,
    pub residual: f64,
    pub hs_norm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayReport {
    pub wave: Option<WaveMeta>,
    pub horizon: f64,
    pub times: Vec<f64>,
    /// `‖f(t)‖_{H^s}` at `times`.
    pub hs_norms: Vec<f64>,
    pub s: f64,
    pub floor: f64,
    pub fit: DecayFit,
    /// Zero initial perturbation.
    pub trivial: bool,
    #[serde(skip)]
    pub records: Vec<Record>,
}

impl DecayReport {
    pub fn verdict(&self) -> Verdict {
        self.fit.verdict
    }

    pub fn c0(&self) -> f64 {
        self.fit.c0
    }

    pub fn r2(&self) -> f64 {
        self.fit.r2
    }

    /// `‖f(T)‖ / ‖f(0)‖`.
    pub fn reduction(&self) -> f64 {
        match (self.hs_norms.first(), self.hs_norms.last()) {
            (Some(&a), Some(&b)) if a > 0.0 => b / a,
            _ => f64::NAN,
        }
    }

    pub fn write_csv(&self, w: impl std::io::Write) -> std::io::Result<()> {
        evolution::write_records_csv(&self.records, w)
    }

    fn assemble(
        wave: Option<WaveMeta>,
        records: Vec<Record>,
        opts: &DecayOptions,
        s: f64,
        floor: f64,
        trivial: bool,
    ) -> Self {
        let times: Vec<f64> = records.iter().map(|r| r.t).collect();
        let hs_norms: Vec<f64> = records.iter().map(|r| r.hs).collect();
        let initial = hs_norms.first().copied().unwrap_or(0.0);
        let fit = fit_decay(&times, &hs_norms, opts.horizon, initial, floor, &opts.window);
        Self {
            wave,
            horizon: opts.horizon,
            times,
            hs_norms,
            s,
            floor,
            fit,
            trivial,
            records,
        }
    }
}

/// Everything a nonlinear decay run needs besides the perturbation.
#[derive(Debug, Clone)]
pub struct DecaySetup<'a> {
    pub wave: &'a TravelingWaveSolution,
    pub phi: &'a SurfaceField,
    pub cfg: FluidConfig,
    pub scheme: SchemeConfig,
    pub backend: DnBackend,
    pub options: DecayOptions,
}

/// Evolves `η* + f₀` under the full equation and fits the decay of
/// `‖η(t) − η*‖_{H^s}`.
pub fn decay_experiment(setup: &DecaySetup, pert: &PerturbationSpec) -> Result<DecayReport> {
    setup.options.window.validate()?;
    let wave = setup.wave;
    let grid = setup.cfg.grid;
    let threshold = setup
        .options
        .admission
        .unwrap_or_else(|| admission_threshold(&wave.eta, pert.s));
    if pert.amplitude > threshold {
        return Err(Error::NotAdmissible {
            amplitude: pert.amplitude,
            threshold,
        });
    }
    let f0 = pert.build(grid)?;
    let eta0 = &wave.eta + &f0;
    let prob = EvolutionProblem::new(setup.phi.clone(), wave.gamma, setup.cfg)?;
    let scheme = SchemeConfig { s: pert.s, ..setup.scheme };
    let tr = evolution::simulate(
        &eta0,
        &prob,
        &scheme,
        &setup.backend,
        setup.options.horizon,
        setup.options.record_every,
        Some(&wave.eta),
    )?;
    let scale = (&eta0 + setup.phi).l2_norm();
    let floor = roundoff_floor(&setup.backend, grid, pert.s, scale).max(wave.residual);
    let meta = WaveMeta {
        gamma: wave.gamma,
        residual: wave.residual,
        hs_norm: hs_norm(&wave.eta, pert.s),
    };
    let trivial = f0.l2_norm() == 0.0;
    Ok(DecayReport::assemble(Some(meta), tr.records, &setup.options, pert.s, floor, trivial))
}

/// One amplitude of a scan; `error` holds the message of a failed run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanRow {
    pub amplitude: f64,
    pub verdict: Option<Verdict>,
    pub c0: Option<f64>,
    pub r2: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanTable {
    pub rows: Vec<ScanRow>,
    /// Largest amplitude with verdict `Decayed`.
    pub margin: Option<f64>,
}

/// Runs [`decay_experiment`] for each amplitude in parallel; failed runs are
/// recorded in their row.
pub fn stability_threshold_scan(
    setup: &DecaySetup,
    template: &PerturbationSpec,
    amplitudes: &[f64],
) -> Result<ScanTable> {
    if amplitudes.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::InvalidParameter("scan amplitudes must be increasing".into()));
    }
    let rows: Vec<ScanRow> = amplitudes
        .par_iter()
        .map(|&a| match decay_experiment(setup, &template.with_amplitude(a)) {
            Ok(r) => ScanRow {
                amplitude: a,
                verdict: Some(r.verdict()),
                c0: Some(r.c0()),
                r2: Some(r.r2()),
                error: None,
            },
            Err(e) => ScanRow {
                amplitude: a,
                verdict: None,
                c0: None,
                r2: None,
                error: Some(e.to_string()),
            },
        })
        .collect();
    let margin = rows
        .iter()
        .filter(|r| r.verdict == Some(Verdict::Decayed))
        .map(|r| r.amplitude)
        .fold(None, |m: Option<f64>, a| Some(m.map_or(a, |m| m.max(a))));
    Ok(ScanTable { rows, margin })
}

/// Evolves `∂_t g = γ∂₁g − G[η*]g` from `g0` and fits the decay of
/// `‖g(t)‖_{H^s}`, with `s` taken from the scheme.
pub fn linear_decay_experiment(
    lin: &LinearProblem,
    g0: &SurfaceField,
    scheme: &SchemeConfig,
    backend: &DnBackend,
    options: &DecayOptions,
) -> Result<DecayReport> {
    options.window.validate()?;
    let mean = g0.mean();
    if mean.abs() > 1e-12 * g0.l2_norm().max(f64::MIN_POSITIVE) && mean != 0.0 {
        return Err(Error::MeanNotZero { mean });
    }
    let mut flow = LinearFlow::new(lin, scheme, backend)?;
    let steps = evolution::step_count(options.horizon, scheme.dt)?;
    let every = options.record_every.max(1);
    let s = scheme.s;
    let record = |g: &SurfaceField, t: f64| Record {
        t,
        l2: g.l2_norm(),
        hs: hs_norm(g, s),
        hhalf_dot: crate::spectral::half_norm(g, Default::default()),
        mean: g.mean(),
    };
    let mut g = g0.clone();
    let mut records = vec![record(&g, 0.0)];
    for i in 1..=steps {
        g = flow.step(&g, None)?;
        if !g.is_finite() {
            return Err(Error::StepRejected {
                before: records.last().map_or(0.0, |r| r.hs),
                after: f64::NAN,
            });
        }
        if i % every == 0 || i == steps {
            records.push(record(&g, i as f64 * scheme.dt));
        }
    }
    let floor = roundoff_floor(backend, lin.cfg.grid, s, g0.l2_norm());
    Ok(DecayReport::assemble(None, records, options, s, floor, g0.l2_norm() == 0.0))
}
