//! Experiment runners. Each run writes its outputs into the configured
//! directory and finishes with `run.json`, also when the solver fails.

use std::path::PathBuf;

use chrono::Utc;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use waves_core::dn::{
    coercivity_infimum_band, coercivity_ratio, commutator_residual, dn_contraction_gap, DnBackend, DnOperator,
    FluidConfig,
};
use waves_core::evolution::{simulate, EvolutionProblem};
use waves_core::spectral::random::{random_field, random_field_with_w_norm, FieldSpec};
use waves_core::spectral::{hs_norm, HalfNormWeight, SurfaceField};
use waves_core::stability::{
    decay_experiment, stability_threshold_scan, DecayOptions, DecaySetup, PerturbationSpec, Verdict,
};
use waves_core::traveling_wave::{
    continuation_in_gamma, solve_traveling_wave, TravelingWaveProblem, TravelingWaveSolution,
};

use crate::config::{emit, ExperimentKind, InitialSurface, RunConfig};
use crate::error::{CliError, Result};
use crate::export::{coeffs_to_json, field_to_csv};
use crate::manifest::{sha256_hex, write_manifest, OperationReport, OutputDir, RunManifest};

pub const CODE_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Comparison backend for `dn-check`.
const REFERENCE_ORDER: usize = 4;
const FLAT_ANCHOR_TOL: f64 = 1e-8;
const AGREEMENT_TOL: f64 = 1e-6;
const MEAN_TOL: f64 = 1e-11;
const SYMMETRY_TOL: f64 = 1e-8;
const MEAN_DRIFT_TOL: f64 = 1e-11;
/// Modes probed by the commutator sweep.
const COMMUTATOR_MODES: [i64; 4] = [4, 8, 16, 32];
/// Allowed growth of the gained commutator ratio over the sweep.
const COMMUTATOR_SLACK: f64 = 2.0;

/// Rounds every float in a document to 15 significant digits.
pub fn round_numbers(v: Value) -> Value {
    match v {
        Value::Number(n) if n.is_f64() => {
            let x = n.as_f64().unwrap_or(f64::NAN);
            format!("{x:.14e}")
                .parse::<f64>()
                .ok()
                .and_then(serde_json::Number::from_f64)
                .map_or(Value::Null, Value::Number)
        }
        Value::Array(a) => Value::Array(a.into_iter().map(round_numbers).collect()),
        Value::Object(m) => Value::Object(m.into_iter().map(|(k, v)| (k, round_numbers(v))).collect()),
        other => other,
    }
}

fn json_bytes(v: Value) -> Result<Vec<u8>> {
    let mut text = serde_json::to_string_pretty(&round_numbers(v))?;
    text.push('\n');
    Ok(text.into_bytes())
}

/// Normalized config hash; identical for documents that differ only in
/// formatting or in spelled-out defaults.
pub fn config_hash(cfg: &RunConfig) -> String {
    sha256_hex(emit(cfg).to_string().as_bytes())
}

struct Ctx<'a> {
    cfg: &'a RunConfig,
    out: OutputDir,
    reports: Vec<OperationReport>,
}

impl Ctx<'_> {
    fn report(&mut self, name: &str, passed: bool, details: Value) {
        self.reports.push(OperationReport {
            name: name.to_string(),
            passed,
            details: round_numbers(details),
        });
    }

    fn write_json(&mut self, name: &str, v: Value) -> Result<()> {
        self.out.write(name, &json_bytes(v)?).map(|_| ())
    }

    fn write_text(&mut self, name: &str, text: &str) -> Result<()> {
        self.out.write(name, text.as_bytes()).map(|_| ())
    }

    fn rng(&self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.cfg.experiment.seed)
    }

    fn fluid(&self) -> FluidConfig {
        self.cfg.problem.fluid()
    }

    fn backend(&self) -> DnBackend {
        self.cfg.solver.backend
    }
}

/// Runs the experiment and writes `run.json`. Solver failures are recorded
/// in the manifest; only I/O failures are returned as errors.
pub fn run(cfg: &RunConfig) -> Result<RunManifest> {
    let started_at = Utc::now().to_rfc3339();
    let root: PathBuf = cfg.experiment.output_dir.clone();
    let mut ctx = Ctx {
        cfg,
        out: OutputDir::create(&root)?,
        reports: Vec::new(),
    };
    let outcome = match cfg.experiment.kind {
        ExperimentKind::DnCheck => dn_check(&mut ctx),
        ExperimentKind::TwSolve => tw_solve(&mut ctx),
        ExperimentKind::Evolve => evolve(&mut ctx),
        ExperimentKind::Stability => stability(&mut ctx),
        ExperimentKind::Props => props(&mut ctx),
    };
    let error = match outcome {
        Ok(()) => None,
        Err(CliError::Solver(e)) => Some(e.to_string()),
        Err(e) => return Err(e),
    };
    let passed = error.is_none() && ctx.reports.iter().all(|r| r.passed);
    let manifest = RunManifest {
        config_hash: config_hash(cfg),
        code_version: CODE_VERSION.to_string(),
        kind: cfg.experiment.kind.as_str().to_string(),
        seed: cfg.experiment.seed,
        started_at,
        finished_at: Utc::now().to_rfc3339(),
        passed,
        error,
        reports: ctx.reports,
        outputs: ctx.out.into_entries(),
    };
    write_manifest(&root, &manifest)?;
    Ok(manifest)
}

fn rel(a: &SurfaceField, b: &SurfaceField, s: f64) -> f64 {
    let d = hs_norm(&(a - b), s);
    let scale = hs_norm(b, s);
    if scale > 0.0 {
        d / scale
    } else {
        d
    }
}

fn dn_check(ctx: &mut Ctx) -> Result<()> {
    let fluid = ctx.fluid();
    let grid = fluid.grid;
    let backend = ctx.backend();
    let s = ctx.cfg.solver.s;
    let exp = &ctx.cfg.experiment;

    let flat = DnOperator::new(&SurfaceField::zeros(grid), &fluid, &backend)?;
    let kmax = (grid.n() as i64 / 3).min(20);
    let mut anchor = Vec::new();
    for k in 1..=kmax {
        let g = SurfaceField::mode(grid, [k, 0], 1.0, 0.0);
        let expected = g.scale(fluid.flat_symbol([k, 0]));
        anchor.push(json!({"k": k, "rel_error": rel(&flat.apply(&g)?, &expected, 0.0)}));
    }
    let anchor_max = anchor.iter().filter_map(|r| r["rel_error"].as_f64()).fold(0.0, f64::max);

    let reference = DnBackend::craig_sulem(REFERENCE_ORDER);
    let mut rng = ctx.rng();
    let mut rows = Vec::new();
    let (mut agree, mut mean, mut sym) = (0.0_f64, 0.0_f64, 0.0_f64);
    for i in 0..exp.samples {
        let eta = random_field_with_w_norm(grid, &FieldSpec::smooth(6), 2, exp.surface_amplitude, &mut rng);
        let g1 = random_field(grid, &FieldSpec::smooth(12), &mut rng);
        let g2 = random_field(grid, &FieldSpec::smooth(12), &mut rng);
        let op = DnOperator::new(&eta, &fluid, &backend)?;
        let (raw, _) = op.apply_raw(&g1)?;
        let a = raw.project_mean_zero();
        let b = DnOperator::new(&eta, &fluid, &reference)?.apply(&g1)?;
        let c = op.apply(&g2)?;
        let e_agree = rel(&a, &b, s);
        let e_mean = raw.mean().abs() / g1.l2_norm();
        let e_sym = (a.inner(&g2) - g1.inner(&c)).abs() / (a.l2_norm() * g2.l2_norm());
        agree = agree.max(e_agree);
        mean = mean.max(e_mean);
        sym = sym.max(e_sym);
        rows.push(json!({
            "sample": i,
            "w2_inf": eta.w_inf_norm(2),
            "agreement": e_agree,
            "mean": e_mean,
            "symmetry": e_sym,
        }));
    }
    ctx.write_json(
        "dn_check.json",
        json!({
            "backend": backend,
            "reference": reference,
            "s": s,
            "flat_anchor": anchor,
            "samples": rows,
        }),
    )?;
    ctx.report("flat-anchor", anchor_max <= FLAT_ANCHOR_TOL, json!({"max_rel_error": anchor_max, "tol": FLAT_ANCHOR_TOL}));
    ctx.report(
        "backend-agreement",
        agree <= AGREEMENT_TOL,
        json!({"max_rel_error": agree, "tol": AGREEMENT_TOL}),
    );
    ctx.report("mean-zero", mean <= MEAN_TOL, json!({"max_mean": mean, "tol": MEAN_TOL}));
    ctx.report("symmetry", sym <= SYMMETRY_TOL, json!({"max_defect": sym, "tol": SYMMETRY_TOL}));
    Ok(())
}

fn tw_problem(cfg: &RunConfig, gamma: f64) -> Result<TravelingWaveProblem> {
    let mut prob = TravelingWaveProblem::new(cfg.problem.phi_field(), gamma, cfg.problem.fluid())?
        .with_tol(cfg.solver.tol)?
        .with_max_iter(cfg.solver.max_iter);
    if let Some(d) = cfg.solver.delta {
        prob = prob.with_delta(d)?;
    }
    prob.s = cfg.solver.s;
    Ok(prob)
}

fn solve_wave(cfg: &RunConfig) -> Result<TravelingWaveSolution> {
    let prob = tw_problem(cfg, cfg.problem.gamma)?;
    Ok(solve_traveling_wave(&prob, &cfg.solver.backend, None)?)
}

fn solution_json(sol: &TravelingWaveSolution) -> Result<Value> {
    let coeffs: Value = serde_json::from_str(&coeffs_to_json(&sol.eta))?;
    Ok(json!({
        "gamma": sol.gamma,
        "residual": sol.residual,
        "contraction_factor": sol.contraction_factor,
        "iterations": sol.iterations(),
        "iter_trace": sol.iter_trace,
        "eta_coeffs": coeffs,
    }))
}

fn tw_solve(ctx: &mut Ctx) -> Result<()> {
    let cfg = ctx.cfg;
    let sol = solve_wave(cfg)?;
    ctx.write_json("solution.json", solution_json(&sol)?)?;
    ctx.write_text("eta.csv", &field_to_csv(&sol.eta))?;
    ctx.report(
        "tw-solve",
        sol.residual <= cfg.solver.tol && sol.contraction_factor < 1.0,
        json!({
            "residual": sol.residual,
            "tol": cfg.solver.tol,
            "contraction_factor": sol.contraction_factor,
            "iterations": sol.iterations(),
        }),
    );
    if let Some(gammas) = &cfg.experiment.gammas {
        let c = continuation_in_gamma(
            &cfg.problem.phi_field(),
            &cfg.problem.fluid(),
            gammas,
            &cfg.solver.backend,
            cfg.solver.delta,
            cfg.solver.tol,
        )?;
        let failures: Vec<Value> = c
            .failures
            .iter()
            .map(|(g, e)| json!({"gamma": g, "error": e.to_string()}))
            .collect();
        ctx.write_json(
            "continuation.json",
            json!({
                "gammas": c.waves.iter().map(|w| w.gamma).collect::<Vec<_>>(),
                "residuals": c.waves.iter().map(|w| w.residual).collect::<Vec<_>>(),
                "quotients": c.quotients,
                "lipschitz_estimate": c.lipschitz_estimate(),
                "failures": failures,
            }),
        )?;
        ctx.report(
            "continuation",
            c.failures.is_empty(),
            json!({"solved": c.waves.len(), "failed": c.failures.len(), "lipschitz_estimate": c.lipschitz_estimate()}),
        );
    }
    Ok(())
}

fn base_surface(ctx: &Ctx) -> Result<(SurfaceField, Option<TravelingWaveSolution>)> {
    match ctx.cfg.experiment.initial {
        InitialSurface::Zero => Ok((SurfaceField::zeros(ctx.fluid().grid), None)),
        InitialSurface::Wave => {
            let sol = solve_wave(ctx.cfg)?;
            Ok((sol.eta.clone(), Some(sol)))
        }
    }
}

fn evolve(ctx: &mut Ctx) -> Result<()> {
    let cfg = ctx.cfg;
    let fluid = ctx.fluid();
    let (base, wave) = base_surface(ctx)?;
    let f0 = match &cfg.experiment.perturbation {
        Some(p) => p.build(fluid.grid)?,
        None => SurfaceField::zeros(fluid.grid),
    };
    let eta0 = &base + &f0;
    let prob = EvolutionProblem::new(cfg.problem.phi_field(), cfg.problem.gamma, fluid)?;
    let scheme = cfg.evolution.scheme_config(cfg.solver.s);
    let tr = simulate(
        &eta0,
        &prob,
        &scheme,
        &cfg.solver.backend,
        cfg.evolution.horizon,
        cfg.evolution.record_every,
        Some(&base),
    )?;
    let mut csv = Vec::new();
    tr.write_csv(&mut csv).map_err(|e| CliError::io(ctx.out.root().join("trajectory.csv"), e))?;
    ctx.out.write("trajectory.csv", &csv)?;
    let last = tr.final_state();
    ctx.write_text("final_eta.csv", &field_to_csv(&last.eta))?;
    let drift = (last.eta.mean() - eta0.mean()).abs();
    let max_dev = tr.records.iter().map(|r| r.hs).fold(0.0, f64::max);
    ctx.write_json(
        "evolve.json",
        json!({
            "final_t": last.t,
            "records": tr.records.len(),
            "rejections": tr.rejections,
            "dissipation": tr.dissipation,
            "mean_drift": drift,
            "max_hs_deviation": max_dev,
            "wave_residual": wave.as_ref().map(|w| w.residual),
        }),
    )?;
    ctx.report("mean-conservation", drift <= MEAN_DRIFT_TOL, json!({"drift": drift, "tol": MEAN_DRIFT_TOL}));
    ctx.report(
        "finite",
        last.eta.is_finite(),
        json!({"final_t": last.t, "rejections": tr.rejections}),
    );
    Ok(())
}

fn stability(ctx: &mut Ctx) -> Result<()> {
    let cfg = ctx.cfg;
    let sol = solve_wave(cfg)?;
    let phi = cfg.problem.phi_field();
    let pert = cfg
        .experiment
        .perturbation
        .clone()
        .unwrap_or_else(|| PerturbationSpec::cosines(&[1, 2, 3], 1e-3));
    let setup = DecaySetup {
        wave: &sol,
        phi: &phi,
        cfg: cfg.problem.fluid(),
        scheme: cfg.evolution.scheme_config(pert.s),
        backend: cfg.solver.backend,
        options: DecayOptions::new(cfg.evolution.horizon).with_record_every(cfg.evolution.record_every),
    };
    let report = decay_experiment(&setup, &pert)?;
    ctx.write_json("decay.json", serde_json::to_value(&report)?)?;
    let mut csv = Vec::new();
    report
        .write_csv(&mut csv)
        .map_err(|e| CliError::io(ctx.out.root().join("decay.csv"), e))?;
    ctx.out.write("decay.csv", &csv)?;
    ctx.report(
        "decay",
        report.verdict() == Verdict::Decayed,
        json!({
            "verdict": report.verdict(),
            "c0": report.c0(),
            "r2": report.r2(),
            "reduction": report.reduction(),
        }),
    );
    if let Some(amps) = &cfg.experiment.amplitudes {
        let table = stability_threshold_scan(&setup, &pert, amps)?;
        ctx.write_json("scan.json", serde_json::to_value(&table)?)?;
        ctx.report("scan", true, json!({"margin": table.margin, "rows": table.rows.len()}));
    }
    Ok(())
}

fn props(ctx: &mut Ctx) -> Result<()> {
    let fluid = ctx.fluid();
    let grid = fluid.grid;
    let backend = ctx.backend();
    let s = ctx.cfg.solver.s;
    let exp = &ctx.cfg.experiment;
    let mut rng = ctx.rng();

    let mut coercive = Vec::new();
    let mut symmetric = Vec::new();
    let mut contraction = Vec::new();
    let band = (grid.n() as i64 / 3).min(8);
    for _ in 0..exp.samples {
        let eta = random_field_with_w_norm(grid, &FieldSpec::smooth(6), 2, exp.surface_amplitude, &mut rng);
        let g1 = random_field(grid, &FieldSpec::smooth(12), &mut rng);
        let g2 = random_field(grid, &FieldSpec::smooth(12), &mut rng);
        let ratio = coercivity_ratio(&eta, &g1, &fluid, &backend, HalfNormWeight::Standard)?;
        let inf = coercivity_infimum_band(&eta, &fluid, &backend, band)?;
        coercive.push((ratio, inf));

        let op = DnOperator::new(&eta, &fluid, &backend)?;
        let a = op.apply(&g1)?;
        let c = op.apply(&g2)?;
        symmetric.push((a.inner(&g2) - g1.inner(&c)).abs() / (a.l2_norm() * g2.l2_norm()));

        // gap over surface distance at two step sizes; linear scaling means bounded quotients
        let w = random_field(grid, &FieldSpec::smooth(6), &mut rng);
        let w = w.scale(0.1 * exp.surface_amplitude / w.w_inf_norm(2));
        let q = |h: f64| -> Result<f64> {
            let eta2 = w.axpy(h, &eta);
            let gap = dn_contraction_gap(&eta, &eta2, &g1, &fluid, &backend, s)?;
            Ok(gap / (hs_norm(&w.scale(h), s) * hs_norm(&g1, s + 1.0)))
        };
        contraction.push((q(1.0)?, q(0.5)?));
    }
    let coercive_ok = coercive.iter().all(|&(r, i)| r > 0.0 && i > 0.0);
    let sym_max = symmetric.iter().cloned().fold(0.0, f64::max);
    let contraction_ok = contraction
        .iter()
        .all(|&(a, b)| a.is_finite() && b > 0.0 && (a / b - 1.0).abs() < 0.25);

    let eta = random_field_with_w_norm(grid, &FieldSpec::smooth(4), 2, exp.surface_amplitude, &mut rng);
    let mut sweep = Vec::new();
    for k in COMMUTATOR_MODES.into_iter().filter(|&k| 3 * k < grid.n() as i64) {
        let f = SurfaceField::mode(grid, [k, 0], 1.0, 0.0);
        let r = commutator_residual(&eta, &f, [1, 0], 0.5, &fluid, &backend)?;
        let ungained = hs_norm(&r.field, 0.5) / hs_norm(&f, 0.5);
        sweep.push((k, r.ratio, ungained));
    }
    let gained: Vec<f64> = sweep.iter().map(|t| t.1).collect();
    let spread = gained.iter().cloned().fold(0.0, f64::max) / gained.iter().cloned().fold(f64::INFINITY, f64::min);
    let growth = match (sweep.first(), sweep.last()) {
        (Some(a), Some(b)) if sweep.len() > 1 => b.2 / a.2,
        _ => f64::NAN,
    };
    // bounded gain; in one dimension the commutator is smoothing, so only the upper bound is structural
    let commutator_ok = !gained.is_empty()
        && gained.iter().all(|&g| g.is_finite() && g <= COMMUTATOR_SLACK * gained[0]);

    let details = json!({
        "coercivity": {
            "passed": coercive_ok,
            "ratios": coercive.iter().map(|c| c.0).collect::<Vec<_>>(),
            "band_infima": coercive.iter().map(|c| c.1).collect::<Vec<_>>(),
        },
        "symmetry": {"passed": sym_max <= SYMMETRY_TOL, "max_defect": sym_max},
        "contraction": {
            "passed": contraction_ok,
            "quotients": contraction.iter().map(|c| [c.0, c.1]).collect::<Vec<_>>(),
        },
        "commutator": {
            "passed": commutator_ok,
            "modes": sweep.iter().map(|t| t.0).collect::<Vec<_>>(),
            "gained": gained,
            "ungained": sweep.iter().map(|t| t.2).collect::<Vec<_>>(),
            "gained_spread": spread,
            "ungained_growth": growth,
        },
    });
    ctx.write_json("props.json", details.clone())?;
    for name in ["coercivity", "symmetry", "contraction", "commutator"] {
        let d = details[name].clone();
        ctx.report(name, d["passed"].as_bool().unwrap_or(false), d);
    }
    Ok(())
}
