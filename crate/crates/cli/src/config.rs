//! Run configuration: a JSON document with the blocks `problem`, `solver`,
//! `evolution` and `experiment`. Parsing collects every violation with its
//! key path; unknown keys are violations. [`emit`] writes the normalized
//! form with all defaults filled in.

use std::path::{Path, PathBuf};

use regex::Regex;
use serde_json::{json, Map, Value};
use waves_core::dn::{Depth, DnBackend, FluidConfig, DEFAULT_TRUNCATION_DEPTH};
use waves_core::evolution::{Scheme, SchemeConfig, TransportTreatment};
use waves_core::spectral::{DealiasRule, PeriodicGrid, SurfaceField};
use waves_core::stability::{PerturbationShape, PerturbationSpec};

use crate::error::{CliError, Result, Violation};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum ExperimentKind {
    DnCheck,
    TwSolve,
    Evolve,
    Stability,
    Props,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 5] = [
        ExperimentKind::DnCheck,
        ExperimentKind::TwSolve,
        ExperimentKind::Evolve,
        ExperimentKind::Stability,
        ExperimentKind::Props,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ExperimentKind::DnCheck => "dn-check",
            ExperimentKind::TwSolve => "tw-solve",
            ExperimentKind::Evolve => "evolve",
            ExperimentKind::Stability => "stability",
            ExperimentKind::Props => "props",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.as_str() == s)
    }
}

/// One term `amplitude · cos(k·x + phase)` of the pressure profile.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhiMode {
    pub k: [i64; 2],
    pub amplitude: f64,
    pub phase: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum PhiSpec {
    /// Closed form such as `0.5*cos(x) - 0.1*sin(3x)`.
    Token(String),
    Modes(Vec<PhiMode>),
}

impl PhiSpec {
    /// Mode table of the profile; tokens are expanded term by term.
    pub fn modes(&self) -> std::result::Result<Vec<PhiMode>, String> {
        match self {
            PhiSpec::Modes(m) => Ok(m.clone()),
            PhiSpec::Token(t) => parse_token(t),
        }
    }

    pub fn build(&self, grid: PeriodicGrid) -> std::result::Result<SurfaceField, String> {
        let mut phi = SurfaceField::zeros(grid);
        for m in self.modes()? {
            let (c, s) = (m.amplitude * m.phase.cos(), -m.amplitude * m.phase.sin());
            phi = &phi + &SurfaceField::mode(grid, m.k, c, s);
        }
        Ok(phi)
    }
}

fn parse_token(token: &str) -> std::result::Result<Vec<PhiMode>, String> {
    let compact: String = token.chars().filter(|c| !c.is_whitespace()).collect();
    if compact == "0" {
        return Ok(Vec::new());
    }
    let term = Regex::new(r"([+-]?)(?:(\d+(?:\.\d*)?(?:[eE][+-]?\d+)?)\*)?(cos|sin)\((\d*)\*?([xy])\)")
        .expect("static pattern");
    let mut modes = Vec::new();
    let mut end = 0;
    for cap in term.captures_iter(&compact) {
        let whole = cap.get(0).expect("match");
        if whole.start() != end || (end > 0 && cap[1].is_empty()) {
            return Err(format!("cannot parse `{token}` near byte {end}"));
        }
        end = whole.end();
        let sign = if &cap[1] == "-" { -1.0 } else { 1.0 };
        let coef: f64 = cap.get(2).map_or(Ok(1.0), |m| m.as_str().parse()).map_err(|e| format!("{e}"))?;
        let m: i64 = if cap[4].is_empty() { 1 } else { cap[4].parse().map_err(|e| format!("{e}"))? };
        if m == 0 {
            return Err(format!("zero wavenumber in `{token}`"));
        }
        let k = if &cap[5] == "x" { [m, 0] } else { [0, m] };
        let phase = if &cap[3] == "cos" { 0.0 } else { -std::f64::consts::FRAC_PI_2 };
        modes.push(PhiMode {
            k,
            amplitude: sign * coef,
            phase,
        });
    }
    if end != compact.len() || modes.is_empty() {
        return Err(format!("cannot parse `{token}`"));
    }
    Ok(modes)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProblemBlock {
    pub phi: PhiSpec,
    pub gamma: f64,
    pub depth: Depth,
    pub separation: f64,
    pub dim: usize,
    pub n: usize,
}

impl ProblemBlock {
    pub fn grid(&self) -> PeriodicGrid {
        PeriodicGrid::new(self.dim, self.n).expect("validated grid")
    }

    pub fn fluid(&self) -> FluidConfig {
        FluidConfig {
            depth: self.depth,
            separation: self.separation,
            grid: self.grid(),
        }
    }

    pub fn phi_field(&self) -> SurfaceField {
        self.phi.build(self.grid()).expect("validated profile")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverBlock {
    pub backend: DnBackend,
    /// Traveling-wave tolerance.
    pub tol: f64,
    pub max_iter: usize,
    pub delta: Option<f64>,
    pub s: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvolutionBlock {
    pub scheme: Scheme,
    pub dt: f64,
    pub horizon: f64,
    pub record_every: usize,
    pub transport: TransportTreatment,
    pub dealias: DealiasRule,
}

impl EvolutionBlock {
    pub fn scheme_config(&self, s: f64) -> SchemeConfig {
        SchemeConfig {
            dt: self.dt,
            scheme: self.scheme,
            dealias: self.dealias,
            transport: self.transport,
            s,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitialSurface {
    /// The traveling wave for the problem's speed.
    Wave,
    Zero,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentBlock {
    pub kind: ExperimentKind,
    pub seed: u64,
    pub output_dir: PathBuf,
    /// Random surfaces drawn by `dn-check` and `props`.
    pub samples: usize,
    /// `W^{2,∞}` size of those surfaces.
    pub surface_amplitude: f64,
    /// Continuation speeds for `tw-solve`.
    pub gammas: Option<Vec<f64>>,
    pub initial: InitialSurface,
    pub perturbation: Option<PerturbationSpec>,
    /// Amplitude scan for `stability`.
    pub amplitudes: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub problem: ProblemBlock,
    pub solver: SolverBlock,
    pub evolution: EvolutionBlock,
    pub experiment: ExperimentBlock,
}

impl RunConfig {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.experiment.seed = seed;
        self
    }

    pub fn with_output_dir(mut self, dir: PathBuf) -> Self {
        self.experiment.output_dir = absolute(&dir);
        self
    }
}

fn absolute(p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        std::env::current_dir().map(|d| d.join(p)).unwrap_or_else(|_| p.to_path_buf())
    }
}

/// Collects violations while walking the document.
#[derive(Default)]
struct Reader {
    errors: Vec<Violation>,
}

fn join(path: &str, key: &str) -> String {
    if path.is_empty() {
        key.to_string()
    } else {
        format!("{path}.{key}")
    }
}

impl Reader {
    fn err(&mut self, path: impl Into<String>, message: impl Into<String>) {
        self.errors.push(Violation {
            path: path.into(),
            message: message.into(),
        });
    }

    fn object<'a>(&mut self, v: &'a Value, path: &str, allowed: &[&str]) -> Option<&'a Map<String, Value>> {
        let Some(m) = v.as_object() else {
            self.err(path, "expected an object");
            return None;
        };
        for key in m.keys() {
            if !allowed.contains(&key.as_str()) {
                self.err(join(path, key), "unknown key");
            }
        }
        Some(m)
    }

    fn block<'a>(&mut self, root: &'a Map<String, Value>, key: &str, allowed: &[&str]) -> Option<&'a Map<String, Value>> {
        match root.get(key) {
            Some(v) => self.object(v, key, allowed),
            None => {
                self.err(key, "required block is missing");
                None
            }
        }
    }

    fn required<'a>(&mut self, m: &'a Map<String, Value>, path: &str, key: &str) -> Option<&'a Value> {
        let v = m.get(key);
        if v.is_none() {
            self.err(join(path, key), "required key is missing");
        }
        v
    }

    fn f64_value(&mut self, v: &Value, path: &str) -> Option<f64> {
        match v.as_f64() {
            Some(x) if x.is_finite() => Some(x),
            _ => {
                self.err(path, "expected a finite number");
                None
            }
        }
    }

    fn f64_or(&mut self, m: &Map<String, Value>, path: &str, key: &str, default: f64) -> f64 {
        match m.get(key) {
            Some(v) => self.f64_value(v, &join(path, key)).unwrap_or(default),
            None => default,
        }
    }

    fn f64_req(&mut self, m: &Map<String, Value>, path: &str, key: &str) -> Option<f64> {
        let v = self.required(m, path, key)?;
        self.f64_value(v, &join(path, key))
    }

    fn f64_opt(&mut self, m: &Map<String, Value>, path: &str, key: &str) -> Option<f64> {
        match m.get(key) {
            None | Some(Value::Null) => None,
            Some(v) => self.f64_value(v, &join(path, key)),
        }
    }

    fn u64_value(&mut self, v: &Value, path: &str) -> Option<u64> {
        let r = v.as_u64();
        if r.is_none() {
            self.err(path, "expected a nonnegative integer");
        }
        r
    }

    fn u64_or(&mut self, m: &Map<String, Value>, path: &str, key: &str, default: u64) -> u64 {
        match m.get(key) {
            Some(v) => self.u64_value(v, &join(path, key)).unwrap_or(default),
            None => default,
        }
    }

    fn i64_value(&mut self, v: &Value, path: &str) -> Option<i64> {
        let r = v.as_i64();
        if r.is_none() {
            self.err(path, "expected an integer");
        }
        r
    }

    fn str_or<'a>(&mut self, m: &'a Map<String, Value>, path: &str, key: &str, default: &'a str) -> &'a str {
        match m.get(key) {
            Some(Value::String(s)) => s,
            Some(_) => {
                self.err(join(path, key), "expected a string");
                default
            }
            None => default,
        }
    }

    fn f64_list(&mut self, m: &Map<String, Value>, path: &str, key: &str) -> Option<Vec<f64>> {
        let v = m.get(key)?;
        let p = join(path, key);
        let Some(items) = v.as_array() else {
            self.err(p, "expected an array of numbers");
            return None;
        };
        let mut out = Vec::with_capacity(items.len());
        for (i, item) in items.iter().enumerate() {
            out.push(self.f64_value(item, &format!("{p}[{i}]"))?);
        }
        Some(out)
    }

    /// `3` or `[3, -1]`.
    fn wavevector(&mut self, v: &Value, path: &str, dim: usize) -> Option<[i64; 2]> {
        match v {
            Value::Array(a) if a.len() == dim && dim == 2 => {
                let k1 = self.i64_value(&a[0], &format!("{path}[0]"))?;
                let k2 = self.i64_value(&a[1], &format!("{path}[1]"))?;
                Some([k1, k2])
            }
            _ if dim == 1 => self.i64_value(v, path).map(|k| [k, 0]),
            _ => {
                self.err(path, "expected a pair [k1, k2]");
                None
            }
        }
    }
}

fn parse_phi(r: &mut Reader, v: &Value, dim: usize, n: usize) -> Option<PhiSpec> {
    let path = "problem.phi";
    let spec = match v {
        Value::String(s) => PhiSpec::Token(s.clone()),
        Value::Array(items) => {
            let mut modes = Vec::new();
            for (i, item) in items.iter().enumerate() {
                let p = format!("{path}[{i}]");
                let m = r.object(item, &p, &["k", "amplitude", "phase"])?;
                let kv = r.required(m, &p, "k")?;
                let k = r.wavevector(kv, &join(&p, "k"), dim)?;
                let amplitude = r.f64_req(m, &p, "amplitude")?;
                let phase = r.f64_or(m, &p, "phase", 0.0);
                modes.push(PhiMode { k, amplitude, phase });
            }
            PhiSpec::Modes(modes)
        }
        _ => {
            r.err(path, "expected a mode table or a closed-form string");
            return None;
        }
    };
    match spec.modes() {
        Err(e) => r.err(path, e),
        Ok(modes) => {
            for m in modes {
                let kmax = m.k[0].abs().max(m.k[1].abs());
                if kmax == 0 {
                    r.err(path, "the zero mode is not allowed; the profile must have mean zero");
                } else if 2 * kmax >= n as i64 {
                    r.err(path, format!("mode {:?} is not resolved on n = {n}", m.k));
                } else if dim == 1 && m.k[1] != 0 {
                    r.err(path, "a profile in y needs dim = 2");
                }
            }
        }
    }
    Some(spec)
}

fn parse_depth(r: &mut Reader, v: &Value) -> Option<Depth> {
    let path = "problem.depth";
    let m = r.object(v, path, &["kind", "b", "truncation_depth"])?;
    match r.str_or(m, path, "kind", "") {
        "finite" => {
            if m.contains_key("truncation_depth") {
                r.err(join(path, "truncation_depth"), "only valid for infinite depth");
            }
            let b = r.f64_req(m, path, "b")?;
            if b <= 0.0 {
                r.err(join(path, "b"), "depth must be positive");
            }
            Some(Depth::Finite { b })
        }
        "infinite" => {
            if m.contains_key("b") {
                r.err(join(path, "b"), "only valid for finite depth");
            }
            let truncation_depth = r.f64_or(m, path, "truncation_depth", DEFAULT_TRUNCATION_DEPTH);
            Some(Depth::Infinite { truncation_depth })
        }
        _ => {
            r.err(join(path, "kind"), "expected \"finite\" or \"infinite\"");
            None
        }
    }
}

fn parse_backend(r: &mut Reader, v: Option<&Value>) -> Option<DnBackend> {
    let path = "solver.backend";
    let Some(v) = v else {
        return Some(DnBackend::default());
    };
    let m = r.object(v, path, &["kind", "order", "dealias", "vertical_points", "solver_tol"])?;
    let backend = match r.str_or(m, path, "kind", "mapped-elliptic") {
        "flat" => DnBackend::Flat,
        "craig-sulem" => {
            let order = r.u64_or(m, path, "order", 4) as usize;
            let dealias = parse_dealias(r, m, path, DealiasRule::TwoThirds);
            DnBackend::CraigSulem { order, dealias }
        }
        "mapped-elliptic" => {
            let DnBackend::MappedElliptic {
                vertical_points,
                solver_tol,
            } = DnBackend::default()
            else {
                unreachable!("default backend is elliptic")
            };
            DnBackend::MappedElliptic {
                vertical_points: r.u64_or(m, path, "vertical_points", vertical_points as u64) as usize,
                solver_tol: r.f64_or(m, path, "solver_tol", solver_tol),
            }
        }
        other => {
            r.err(join(path, "kind"), format!("unknown backend `{other}`"));
            return None;
        }
    };
    let foreign: &[&str] = match backend {
        DnBackend::Flat => &["order", "dealias", "vertical_points", "solver_tol"],
        DnBackend::CraigSulem { .. } => &["vertical_points", "solver_tol"],
        DnBackend::MappedElliptic { .. } => &["order", "dealias"],
    };
    for key in foreign {
        if m.contains_key(*key) {
            r.err(join(path, key), "not a parameter of this backend");
        }
    }
    if let Err(e) = backend.validate() {
        r.err(path, e.to_string());
    }
    Some(backend)
}

fn parse_dealias(r: &mut Reader, m: &Map<String, Value>, path: &str, default: DealiasRule) -> DealiasRule {
    match m.get("dealias") {
        None => default,
        Some(Value::String(s)) if s == "two-thirds" => DealiasRule::TwoThirds,
        Some(Value::String(s)) if s == "none" => DealiasRule::None,
        Some(_) => {
            r.err(join(path, "dealias"), "expected \"two-thirds\" or \"none\"");
            default
        }
    }
}

fn parse_perturbation(r: &mut Reader, v: &Value, dim: usize) -> Option<PerturbationSpec> {
    let path = "experiment.perturbation";
    let m = r.object(v, path, &["modes", "seed", "kmax", "amplitude", "s"])?;
    let amplitude = r.f64_req(m, path, "amplitude")?;
    if amplitude < 0.0 {
        r.err(join(path, "amplitude"), "must be nonnegative");
    }
    let s = r.f64_or(m, path, "s", waves_core::evolution::DEFAULT_MONITOR_S);
    let shape = match (m.get("modes"), m.get("seed")) {
        (Some(modes), None) => {
            let p = join(path, "modes");
            let Some(items) = modes.as_array() else {
                r.err(p, "expected an array of wavenumbers");
                return None;
            };
            let mut out = Vec::new();
            for (i, item) in items.iter().enumerate() {
                let k = r.wavevector(item, &format!("{p}[{i}]"), dim)?;
                if k == [0, 0] {
                    r.err(format!("{p}[{i}]"), "the zero mode is not allowed");
                }
                out.push(waves_core::stability::ModeAmplitude { k, cos: 1.0, sin: 0.0 });
            }
            if m.contains_key("kmax") {
                r.err(join(path, "kmax"), "only valid with `seed`");
            }
            PerturbationShape::Modes { modes: out }
        }
        (None, Some(seed)) => {
            let seed = r.u64_value(seed, &join(path, "seed"))?;
            let kmax = r.u64_or(m, path, "kmax", 5) as i64;
            PerturbationShape::Random { seed, kmax }
        }
        _ => {
            r.err(path, "give exactly one of `modes` and `seed`");
            return None;
        }
    };
    Some(PerturbationSpec { shape, amplitude, s })
}

const PROBLEM_KEYS: &[&str] = &["phi", "gamma", "depth", "separation", "dim", "n"];
const SOLVER_KEYS: &[&str] = &["backend", "tol", "max_iter", "delta", "s"];
const EVOLUTION_KEYS: &[&str] = &["scheme", "eps", "dt", "horizon", "record_every", "transport", "dealias"];
const EXPERIMENT_KEYS: &[&str] = &[
    "kind",
    "seed",
    "output_dir",
    "samples",
    "surface_amplitude",
    "gammas",
    "initial",
    "perturbation",
    "amplitudes",
];

/// Validates a parsed document. Relative output directories are resolved
/// against `base`; `kind` fills in a missing `experiment.kind` and must
/// agree with a present one.
pub fn parse_value(doc: &Value, base: &Path, kind: Option<ExperimentKind>) -> Result<RunConfig> {
    let mut r = Reader::default();
    let Some(root) = r.object(doc, "", &["problem", "solver", "evolution", "experiment"]) else {
        return Err(CliError::SchemaViolation(r.errors));
    };
    let empty = Map::new();
    let problem = r.block(root, "problem", PROBLEM_KEYS).unwrap_or(&empty);
    let solver = match root.get("solver") {
        Some(v) => r.object(v, "solver", SOLVER_KEYS).unwrap_or(&empty),
        None => &empty,
    };
    let evolution = match root.get("evolution") {
        Some(v) => r.object(v, "evolution", EVOLUTION_KEYS).unwrap_or(&empty),
        None => &empty,
    };
    let experiment = match root.get("experiment") {
        Some(v) => r.object(v, "experiment", EXPERIMENT_KEYS).unwrap_or(&empty),
        None => &empty,
    };

    // problem
    let dim = r.u64_or(problem, "problem", "dim", 1) as usize;
    let n = r.required(problem, "problem", "n").and_then(|v| r.u64_value(v, "problem.n")).unwrap_or(0) as usize;
    let grid_ok = match PeriodicGrid::new(dim, n) {
        Ok(_) => true,
        Err(e) => {
            if problem.contains_key("n") {
                r.err("problem.n", e.to_string());
            }
            false
        }
    };
    let gamma = r.f64_or(problem, "problem", "gamma", 0.0);
    let depth = r.required(problem, "problem", "depth").and_then(|v| parse_depth(&mut r, v));
    let default_sep = match depth {
        Some(Depth::Finite { b }) => 0.1 * b,
        _ => 0.0,
    };
    let separation = r.f64_or(problem, "problem", "separation", default_sep);
    if let Some(Depth::Finite { b }) = depth {
        if !(separation > 0.0 && separation < b) {
            r.err("problem.separation", format!("must lie in (0, {b})"));
        }
    }
    let phi = match problem.get("phi") {
        Some(v) if grid_ok => parse_phi(&mut r, v, dim, n),
        Some(_) => None,
        None => Some(PhiSpec::Modes(Vec::new())),
    };

    // solver
    let backend = parse_backend(&mut r, solver.get("backend"));
    let tol = r.f64_or(solver, "solver", "tol", 1e-11);
    if tol <= 0.0 {
        r.err("solver.tol", "must be positive");
    }
    let max_iter = r.u64_or(solver, "solver", "max_iter", 200) as usize;
    let delta = r.f64_opt(solver, "solver", "delta");
    let s = r.f64_or(solver, "solver", "s", waves_core::evolution::DEFAULT_MONITOR_S);

    // evolution
    let scheme = match r.str_or(evolution, "evolution", "scheme", "imex2") {
        "imex1" => Some(Scheme::Imex1),
        "imex2" => Some(Scheme::Imex2),
        "eps-viscosity" => Some(Scheme::EpsViscosity { eps: 1e-3 }),
        other => {
            r.err("evolution.scheme", format!("unknown scheme `{other}`"));
            None
        }
    };
    let scheme = match scheme {
        Some(Scheme::EpsViscosity { .. }) => {
            let eps = r.f64_or(evolution, "evolution", "eps", 1e-3);
            Some(Scheme::EpsViscosity { eps })
        }
        other => {
            if evolution.contains_key("eps") {
                r.err("evolution.eps", "only valid with scheme \"eps-viscosity\"");
            }
            other
        }
    };
    let dt = r.f64_or(evolution, "evolution", "dt", 1e-2);
    let horizon = r.f64_or(evolution, "evolution", "horizon", 1.0);
    let record_every = r.u64_or(evolution, "evolution", "record_every", 10) as usize;
    if record_every == 0 {
        r.err("evolution.record_every", "must be at least 1");
    }
    let transport = match r.str_or(evolution, "evolution", "transport", "implicit") {
        "implicit" => TransportTreatment::Implicit,
        "exact-phase" => TransportTreatment::ExactPhase,
        "explicit" => TransportTreatment::Explicit,
        other => {
            r.err("evolution.transport", format!("unknown transport treatment `{other}`"));
            TransportTreatment::Implicit
        }
    };
    let dealias = parse_dealias(&mut r, evolution, "evolution", DealiasRule::None);
    if let Some(sch) = scheme {
        let cfg = SchemeConfig {
            dt,
            scheme: sch,
            dealias,
            transport,
            s,
        };
        if let Err(e) = cfg.validate() {
            r.err("evolution", e.to_string());
        } else if horizon < 0.0 || ((horizon / dt).round() * dt - horizon).abs() > 1e-9 * horizon.max(dt) {
            r.err("evolution.horizon", format!("must be a nonnegative multiple of dt = {dt}"));
        }
    }

    // experiment
    let kind = match (experiment.get("kind"), kind) {
        (Some(Value::String(s)), k) => match ExperimentKind::parse(s) {
            Some(parsed) if k.is_none_or(|k| k == parsed) => Some(parsed),
            Some(parsed) => {
                r.err(
                    "experiment.kind",
                    format!("`{}` conflicts with the command `{}`", parsed.as_str(), k.map_or("", |k| k.as_str())),
                );
                None
            }
            None => {
                r.err("experiment.kind", format!("unknown experiment kind `{s}`"));
                None
            }
        },
        (Some(_), _) => {
            r.err("experiment.kind", "expected a string");
            None
        }
        (None, Some(k)) => Some(k),
        (None, None) => {
            r.err("experiment.kind", "required key is missing");
            None
        }
    };
    let seed = r.u64_or(experiment, "experiment", "seed", 0);
    let output_dir = base.join(r.str_or(experiment, "experiment", "output_dir", "out"));
    let samples = r.u64_or(experiment, "experiment", "samples", 10) as usize;
    let surface_amplitude = r.f64_or(experiment, "experiment", "surface_amplitude", 0.1);
    let gammas = r.f64_list(experiment, "experiment", "gammas");
    if let Some(g) = &gammas {
        if g.is_empty() {
            r.err("experiment.gammas", "must not be empty");
        }
    }
    let initial = match r.str_or(experiment, "experiment", "initial", "wave") {
        "wave" => InitialSurface::Wave,
        "zero" => InitialSurface::Zero,
        other => {
            r.err("experiment.initial", format!("expected \"wave\" or \"zero\", got `{other}`"));
            InitialSurface::Wave
        }
    };
    let perturbation = experiment.get("perturbation").and_then(|v| parse_perturbation(&mut r, v, dim));
    let amplitudes = r.f64_list(experiment, "experiment", "amplitudes");
    if let Some(a) = &amplitudes {
        if a.windows(2).any(|w| !(w[0] < w[1])) || a.iter().any(|&x| x < 0.0) {
            r.err("experiment.amplitudes", "must be nonnegative and increasing");
        }
    }

    if !r.errors.is_empty() {
        return Err(CliError::SchemaViolation(r.errors));
    }
    let (Some(phi), Some(depth), Some(backend), Some(scheme), Some(kind)) = (phi, depth, backend, scheme, kind) else {
        unreachable!("every missing piece records a violation")
    };
    Ok(RunConfig {
        problem: ProblemBlock {
            phi,
            gamma,
            depth,
            separation,
            dim,
            n,
        },
        solver: SolverBlock {
            backend,
            tol,
            max_iter,
            delta,
            s,
        },
        evolution: EvolutionBlock {
            scheme,
            dt,
            horizon,
            record_every,
            transport,
            dealias,
        },
        experiment: ExperimentBlock {
            kind,
            seed,
            output_dir: absolute(&output_dir),
            samples,
            surface_amplitude,
            gammas,
            initial,
            perturbation,
            amplitudes,
        },
    })
}

/// Reads and validates a config file.
pub fn parse_config(path: &Path, kind: Option<ExperimentKind>) -> Result<RunConfig> {
    if !path.is_file() {
        return Err(CliError::MissingFile(path.to_path_buf()));
    }
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let doc: Value = serde_json::from_str(&text)?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    parse_value(&doc, &base, kind)
}

fn wavevector_json(k: [i64; 2], dim: usize) -> Value {
    if dim == 1 {
        json!(k[0])
    } else {
        json!([k[0], k[1]])
    }
}

/// Normalized document with every default written out.
pub fn emit(cfg: &RunConfig) -> Value {
    let p = &cfg.problem;
    let phi = match &p.phi {
        PhiSpec::Token(t) => json!(t),
        PhiSpec::Modes(m) => Value::Array(
            m.iter()
                .map(|m| json!({"k": wavevector_json(m.k, p.dim), "amplitude": m.amplitude, "phase": m.phase}))
                .collect(),
        ),
    };
    let depth = match p.depth {
        Depth::Finite { b } => json!({"kind": "finite", "b": b}),
        Depth::Infinite { truncation_depth } => json!({"kind": "infinite", "truncation_depth": truncation_depth}),
    };
    let dealias_str = |d: DealiasRule| match d {
        DealiasRule::TwoThirds => "two-thirds",
        DealiasRule::None => "none",
    };
    let backend = match cfg.solver.backend {
        DnBackend::Flat => json!({"kind": "flat"}),
        DnBackend::CraigSulem { order, dealias } => {
            json!({"kind": "craig-sulem", "order": order, "dealias": dealias_str(dealias)})
        }
        DnBackend::MappedElliptic {
            vertical_points,
            solver_tol,
        } => json!({"kind": "mapped-elliptic", "vertical_points": vertical_points, "solver_tol": solver_tol}),
    };
    let mut solver = json!({
        "backend": backend,
        "tol": cfg.solver.tol,
        "max_iter": cfg.solver.max_iter,
        "s": cfg.solver.s,
    });
    if let Some(d) = cfg.solver.delta {
        solver["delta"] = json!(d);
    }
    let ev = &cfg.evolution;
    let mut evolution = json!({
        "scheme": match ev.scheme {
            Scheme::Imex1 => "imex1",
            Scheme::Imex2 => "imex2",
            Scheme::EpsViscosity { .. } => "eps-viscosity",
        },
        "dt": ev.dt,
        "horizon": ev.horizon,
        "record_every": ev.record_every,
        "transport": match ev.transport {
            TransportTreatment::Implicit => "implicit",
            TransportTreatment::ExactPhase => "exact-phase",
            TransportTreatment::Explicit => "explicit",
        },
        "dealias": dealias_str(ev.dealias),
    });
    if let Scheme::EpsViscosity { eps } = ev.scheme {
        evolution["eps"] = json!(eps);
    }
    let ex = &cfg.experiment;
    let mut experiment = json!({
        "kind": ex.kind.as_str(),
        "seed": ex.seed,
        "output_dir": ex.output_dir.to_string_lossy(),
        "samples": ex.samples,
        "surface_amplitude": ex.surface_amplitude,
        "initial": match ex.initial {
            InitialSurface::Wave => "wave",
            InitialSurface::Zero => "zero",
        },
    });
    if let Some(g) = &ex.gammas {
        experiment["gammas"] = json!(g);
    }
    if let Some(a) = &ex.amplitudes {
        experiment["amplitudes"] = json!(a);
    }
    if let Some(pert) = &ex.perturbation {
        let mut v = json!({"amplitude": pert.amplitude, "s": pert.s});
        match &pert.shape {
            PerturbationShape::Modes { modes } => {
                v["modes"] = Value::Array(modes.iter().map(|m| wavevector_json(m.k, p.dim)).collect());
            }
            PerturbationShape::Random { seed, kmax } => {
                v["seed"] = json!(seed);
                v["kmax"] = json!(kmax);
            }
        }
        experiment["perturbation"] = v;
    }
    json!({
        "problem": {
            "phi": phi,
            "gamma": p.gamma,
            "depth": depth,
            "separation": p.separation,
            "dim": p.dim,
            "n": p.n,
        },
        "solver": solver,
        "evolution": evolution,
        "experiment": experiment,
    })
}
