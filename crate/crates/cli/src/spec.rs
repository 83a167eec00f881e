//! Experiment specification files.
//!
//! A spec is a flat `key = value` text file with dotted keys such as
//! `flow.dt` or `estimator.x`. Lines starting with `#` are comments. Every
//! id is checked against the catalogs before anything runs.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;

use geomflow::estimators::{FitWindow, MomentMethod, MomentTarget};
use geomflow::flows::MODEL_IDS;
use geomflow::geometry::MANIFOLD_IDS;
use geomflow::region::REGION_IDS;
use geomflow::{Error, FlowConfig, Model, RegionSpec, TestFunction, Vector};

#[derive(Debug, Clone, PartialEq)]
pub struct SpecError {
    pub line: Option<usize>,
    pub field: Option<String>,
    pub message: String,
}

impl SpecError {
    fn new(line: Option<usize>, field: &str, message: impl Into<String>) -> Self {
        SpecError { line, field: Some(field.to_string()), message: message.into() }
    }
}

impl fmt::Display for SpecError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.line, &self.field) {
            (Some(l), Some(k)) => write!(f, "line {l}, field `{k}`: {}", self.message),
            (Some(l), None) => write!(f, "line {l}: {}", self.message),
            (None, Some(k)) => write!(f, "field `{k}`: {}", self.message),
            (None, None) => write!(f, "{}", self.message),
        }
    }
}

impl std::error::Error for SpecError {}

struct EstimatorDef {
    id: &'static str,
    required: &'static [&'static str],
    /// Optional keys with their defaults.
    optional: &'static [(&'static str, &'static str)],
}

const ESTIMATORS: &[EstimatorDef] = &[
    EstimatorDef { id: "semigroup", required: &["f", "x"], optional: &[] },
    EstimatorDef { id: "delta_pt", required: &["f", "x", "v"], optional: &[] },
    EstimatorDef { id: "bismut_gradient", required: &["f", "x", "v"], optional: &[] },
    EstimatorDef { id: "bismut_one_form", required: &["f", "x", "v"], optional: &[] },
    EstimatorDef { id: "bismut_weight", required: &["x", "v"], optional: &[] },
    EstimatorDef {
        id: "moment_exponent",
        required: &["x"],
        optional: &[("p", "1"), ("target", "operator"), ("method", "sample-mean"), ("window", "upper-half")],
    },
    EstimatorDef {
        id: "intertwining",
        required: &["f", "x", "v"],
        optional: &[("epsilons", "0.01,0.001"), ("c_eps", "10")],
    },
    EstimatorDef { id: "grad_log_kernel", required: &["x", "y"], optional: &[("n_steps", "1000")] },
    EstimatorDef { id: "exit_tail", required: &["x", "region"], optional: &[("window", "auto")] },
    EstimatorDef { id: "c0_probe", required: &["region", "starts"], optional: &[] },
    EstimatorDef { id: "explosion", required: &["starts"], optional: &[("margin", "0.001")] },
    EstimatorDef { id: "ergodic_average", required: &["x", "region"], optional: &[] },
];

pub fn estimator_ids() -> Vec<&'static str> {
    ESTIMATORS.iter().map(|e| e.id).collect()
}

const TOP_KEYS: &[&str] = &[
    "experiment",
    "manifold",
    "drift",
    "estimator",
    "seed",
    "n_paths",
    "output",
    "t",
    "flow.dt",
    "flow.t_max",
    "flow.explosion_radius",
    "flow.retraction_tolerance",
    "check.row",
    "check.target",
    "check.tolerance",
];

/// Key/value pairs with the line each came from.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RawSpec {
    pub entries: BTreeMap<String, (String, usize)>,
}

impl RawSpec {
    pub fn parse(text: &str) -> Result<Self, SpecError> {
        let mut entries: BTreeMap<String, (String, usize)> = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let s = raw.trim();
            if s.is_empty() || s.starts_with('#') {
                continue;
            }
            let (k, v) = s
                .split_once('=')
                .ok_or_else(|| SpecError { line: Some(line), field: None, message: format!("expected `key = value`, got `{s}`") })?;
            let (k, v) = (k.trim(), v.trim());
            if k.is_empty() || !k.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '.') {
                return Err(SpecError { line: Some(line), field: None, message: format!("malformed key `{k}`") });
            }
            if v.is_empty() {
                return Err(SpecError::new(Some(line), k, "empty value"));
            }
            if let Some((_, first)) = entries.get(k) {
                return Err(SpecError::new(Some(line), k, format!("duplicate key (first set on line {first})")));
            }
            entries.insert(k.to_string(), (v.to_string(), line));
        }
        Ok(RawSpec { entries })
    }

    /// Replace or add a value that did not come from the file.
    pub fn set(&mut self, key: &str, value: impl Into<String>) {
        self.entries.insert(key.to_string(), (value.into(), 0));
    }
}

/// A validated estimator or probe call.
#[derive(Debug, Clone, PartialEq)]
pub enum Plan {
    Semigroup { f: TestFunction, x: Vector },
    DeltaPt { f: TestFunction, x: Vector, v: Vector },
    BismutGradient { f: TestFunction, x: Vector, v: Vector },
    BismutOneForm { f: TestFunction, x: Vector, v: Vector },
    BismutWeight { x: Vector, v: Vector },
    MomentExponent { x: Vector, p: f64, target: MomentTarget, method: MomentMethod, window: FitWindow },
    Intertwining { f: TestFunction, x: Vector, v: Vector, epsilons: Vec<f64>, c_eps: f64 },
    GradLogKernel { c: f64, gamma: f64, x: f64, y: f64, n_steps: u64 },
    ExitTail { x: Vector, region: RegionSpec, window: Option<usize> },
    C0Probe { region: RegionSpec, starts: Vec<Vector> },
    Explosion { starts: Vec<Vector>, margin: f64 },
    Ergodic { x: Vector, region: RegionSpec },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    /// Estimator column of the row to test; empty selects the last row.
    pub row: String,
    pub target: f64,
    pub tolerance: f64,
}

/// A fully resolved experiment.
#[derive(Debug, Clone)]
pub struct ExperimentSpec {
    /// Every key after defaults and overrides; the manifest prints these.
    pub values: BTreeMap<String, String>,
    pub experiment: String,
    pub model: Model,
    pub estimator: String,
    pub plan: Plan,
    pub flow: FlowConfig,
    pub seed: u64,
    pub n_paths: u64,
    pub output: PathBuf,
    pub times: Vec<f64>,
    pub check: Option<Check>,
}

struct Ctx<'a> {
    raw: &'a RawSpec,
}

impl Ctx<'_> {
    fn line(&self, k: &str) -> Option<usize> {
        self.raw.entries.get(k).map(|(_, l)| *l).filter(|l| *l > 0)
    }

    fn get(&self, k: &str) -> Option<&str> {
        self.raw.entries.get(k).map(|(v, _)| v.as_str())
    }

    fn req(&self, k: &str) -> Result<&str, SpecError> {
        self.get(k).ok_or_else(|| SpecError::new(None, k, "required field is missing"))
    }

    fn err(&self, k: &str, msg: impl Into<String>) -> SpecError {
        SpecError::new(self.line(k), k, msg)
    }

    fn lib(&self, k: &str, e: Error) -> SpecError {
        self.err(k, e.to_string())
    }

    fn f64(&self, k: &str) -> Result<f64, SpecError> {
        let s = self.req(k)?;
        let v: f64 = s.parse().map_err(|_| self.err(k, format!("`{s}` is not a number")))?;
        if !v.is_finite() {
            return Err(self.err(k, format!("`{s}` is not finite")));
        }
        Ok(v)
    }

    fn u64(&self, k: &str) -> Result<u64, SpecError> {
        let s = self.req(k)?;
        s.parse().map_err(|_| self.err(k, format!("`{s}` is not a non-negative integer")))
    }

    fn list(&self, k: &str, s: &str) -> Result<Vec<f64>, SpecError> {
        s.split(',')
            .map(|c| {
                let c = c.trim();
                c.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| self.err(k, format!("`{c}` is not a number")))
            })
            .collect()
    }

    /// Ambient coordinates `a,b,c`, or `chart:q1,q2` for the manifold's
    /// natural coordinates.
    fn point(&self, k: &str, s: &str, model: &Model) -> Result<Vector, SpecError> {
        let sys = model.system();
        let x = match s.strip_prefix("chart:") {
            Some(q) => {
                let q = self.list(k, q)?;
                let m = model.manifold().ok_or_else(|| self.err(k, "chart coordinates need a manifold model"))?;
                m.point_from_coords(&q).map_err(|e| self.lib(k, e))?
            }
            None => Vector::from(self.list(k, s)?),
        };
        if x.len() != sys.ambient_dim() {
            return Err(self.lib(k, Error::DimensionMismatch { expected: sys.ambient_dim(), got: x.len() }));
        }
        Ok(x)
    }

    fn start(&self, k: &str, s: &str, model: &Model, tol: f64) -> Result<Vector, SpecError> {
        let x = self.point(k, s, model)?;
        model.system().check_start(&x, tol).map_err(|e| self.lib(k, e))?;
        Ok(x)
    }

    fn tangent(&self, k: &str, model: &Model, x: &Vector) -> Result<Vector, SpecError> {
        let sys = model.system();
        let v = Vector::from(self.list(k, self.req(k)?)?);
        if v.len() != sys.ambient_dim() {
            return Err(self.lib(k, Error::DimensionMismatch { expected: sys.ambient_dim(), got: v.len() }));
        }
        let off = (&sys.project_tangent(x, &v) - &v).norm();
        if off > 1e-8 * v.norm().max(1.0) {
            return Err(self.lib(k, Error::NotTangent { normal_component: off }));
        }
        if v.norm() == 0.0 {
            return Err(self.lib(k, Error::ZeroVector));
        }
        Ok(v)
    }

    fn function(&self, k: &str, model: &Model) -> Result<TestFunction, SpecError> {
        TestFunction::from_id(self.req(k)?, model.system().ambient_dim()).map_err(|e| self.lib(k, e))
    }

    fn region(&self, k: &str, model: &Model) -> Result<RegionSpec, SpecError> {
        RegionSpec::from_id(self.req(k)?, model.system().ambient_dim()).map_err(|e| {
            let valid = REGION_IDS.join(", ");
            match e {
                Error::UnknownId { .. } => self.err(k, format!("{e}")),
                e => self.err(k, format!("{e} (region ids: {valid})")),
            }
        })
    }
}

/// `a,b,c` or `start:stop:step`.
fn parse_times(ctx: &Ctx<'_>, s: &str) -> Result<Vec<f64>, SpecError> {
    let times = if s.contains(':') {
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 3 {
            return Err(ctx.err("t", "range must be start:stop:step"));
        }
        let n = |s: &str| s.trim().parse::<f64>().map_err(|_| ctx.err("t", format!("`{s}` is not a number")));
        let (a, b, h) = (n(parts[0])?, n(parts[1])?, n(parts[2])?);
        if !(h > 0.0) || b < a {
            return Err(ctx.err("t", "range needs stop ≥ start and a positive step"));
        }
        let k = ((b - a) / h + 1e-9).floor() as usize;
        (0..=k).map(|i| a + i as f64 * h).collect()
    } else {
        ctx.list("t", s)?
    };
    if times.is_empty() || !(times[0] > 0.0) || times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(ctx.err("t", "time grid must be positive and strictly increasing"));
    }
    Ok(times)
}

fn fmt_times(t: &[f64]) -> String {
    t.iter().map(|v| format!("{v:?}")).collect::<Vec<_>>().join(",")
}

impl ExperimentSpec {
    pub fn parse(text: &str) -> Result<Self, SpecError> {
        Self::resolve(RawSpec::parse(text)?)
    }

    /// Fill defaults, check every key and id, and build the plan.
    pub fn resolve(mut raw: RawSpec) -> Result<Self, SpecError> {
        let est_id = raw
            .entries
            .get("estimator")
            .map(|(v, _)| v.clone())
            .ok_or_else(|| SpecError::new(None, "estimator", format!("required field is missing (valid: {})", estimator_ids().join(", "))))?;
        let def = ESTIMATORS.iter().find(|d| d.id == est_id).ok_or_else(|| {
            SpecError::new(
                raw.entries.get("estimator").map(|(_, l)| *l),
                "estimator",
                format!("unknown estimator `{est_id}`; valid options: {}", estimator_ids().join(", ")),
            )
        })?;
        let allowed: Vec<String> = TOP_KEYS
            .iter()
            .map(|s| s.to_string())
            .chain(def.required.iter().map(|k| format!("estimator.{k}")))
            .chain(def.optional.iter().map(|(k, _)| format!("estimator.{k}")))
            .collect();
        for (k, (_, line)) in &raw.entries {
            if !allowed.contains(k) {
                return Err(SpecError::new(Some(*line), k, format!("unknown key for estimator `{est_id}`; valid keys: {}", allowed.join(", "))));
            }
        }
        let defaults: [(&str, &str); 6] = [
            ("drift", "none"),
            ("seed", "1"),
            ("n_paths", "10000"),
            ("output", "."),
            ("flow.dt", "0.001"),
            ("flow.explosion_radius", "1000000"),
        ];
        for (k, v) in defaults {
            raw.entries.entry(k.to_string()).or_insert((v.to_string(), 0));
        }
        raw.entries.entry("flow.retraction_tolerance".into()).or_insert(("1e-10".into(), 0));
        for (k, v) in def.optional {
            raw.entries.entry(format!("estimator.{k}")).or_insert((v.to_string(), 0));
        }

        let ctx = Ctx { raw: &raw };
        let experiment = ctx.req("experiment")?.to_string();
        if !experiment.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '-' | '.')) || experiment.starts_with('.') {
            return Err(ctx.err("experiment", "experiment id may only use letters, digits, `_`, `-` and `.`"));
        }
        let manifold = ctx.req("manifold")?;
        let drift = ctx.req("drift")?;
        let model = Model::from_ids(manifold, drift).map_err(|e| match e {
            Error::UnknownId { kind: "drift", .. } => ctx.lib("drift", e),
            Error::UnknownId { .. } => ctx.lib("manifold", e),
            e if e.to_string().contains("drift") => ctx.lib("drift", e),
            e => ctx.err("manifold", format!("{e} (manifold ids: {}; model ids: {})", MANIFOLD_IDS.join(", "), MODEL_IDS.join(", "))),
        })?;

        let times = parse_times(&ctx, ctx.req("t")?)?;
        let t_last = *times.last().unwrap();
        drop(ctx);
        raw.entries.entry("flow.t_max".into()).or_insert((format!("{t_last:?}"), 0));
        let ctx = Ctx { raw: &raw };

        let mut flow = FlowConfig::new(ctx.f64("flow.dt")?, ctx.f64("flow.t_max")?);
        flow.explosion_radius = ctx.f64("flow.explosion_radius")?;
        flow.retraction_tolerance = ctx.f64("flow.retraction_tolerance")?;
        flow.validate().map_err(|e| ctx.lib("flow.dt", e))?;
        if t_last > flow.t_max * (1.0 + 1e-12) {
            return Err(ctx.err("t", format!("grid ends at {t_last}, after flow.t_max = {}", flow.t_max)));
        }
        if est_id != "grad_log_kernel" {
            for &t in &times {
                flow.steps_to(t).map_err(|e| ctx.lib("t", e))?;
            }
        }
        let seed = ctx.u64("seed")?;
        let n_paths = ctx.u64("n_paths")?;
        if n_paths == 0 {
            return Err(ctx.err("n_paths", "must be at least 1"));
        }
        let output = PathBuf::from(ctx.req("output")?);
        let tol = flow.retraction_tolerance.max(1e-10);

        let e = |k: &str| format!("estimator.{k}");
        let x_of = |ctx: &Ctx<'_>| -> Result<Vector, SpecError> { ctx.start(&e("x"), ctx.req(&e("x"))?, &model, tol) };
        let plan = match def.id {
            "semigroup" => Plan::Semigroup { f: ctx.function(&e("f"), &model)?, x: x_of(&ctx)? },
            "delta_pt" | "bismut_gradient" | "bismut_one_form" => {
                let f = ctx.function(&e("f"), &model)?;
                let x = x_of(&ctx)?;
                let v = ctx.tangent(&e("v"), &model, &x)?;
                match def.id {
                    "delta_pt" => Plan::DeltaPt { f, x, v },
                    "bismut_gradient" => Plan::BismutGradient { f, x, v },
                    _ => {
                        geomflow::estimators::exact_one_form(&f, &model).map_err(|err| ctx.lib(&e("f"), err))?;
                        Plan::BismutOneForm { f, x, v }
                    }
                }
            }
            "bismut_weight" => {
                let x = x_of(&ctx)?;
                let v = ctx.tangent(&e("v"), &model, &x)?;
                Plan::BismutWeight { x, v }
            }
            "moment_exponent" => {
                let x = x_of(&ctx)?;
                let p = ctx.f64(&e("p"))?;
                let target = match ctx.req(&e("target"))? {
                    "operator" => MomentTarget::OperatorNorm,
                    _ => MomentTarget::Direction(ctx.tangent(&e("target"), &model, &x)?),
                };
                let method = match ctx.req(&e("method"))? {
                    "sample-mean" => MomentMethod::SampleMean,
                    "lognormal" => MomentMethod::LogNormal,
                    s => return Err(ctx.err(&e("method"), format!("unknown method `{s}`; valid options: sample-mean, lognormal"))),
                };
                let window = match ctx.req(&e("window"))? {
                    "upper-half" => FitWindow::UpperHalf,
                    "all" => FitWindow::All,
                    s => {
                        let r = s.split_once(':').and_then(|(a, b)| Some((a.trim().parse().ok()?, b.trim().parse().ok()?)));
                        let (a, b) = r.ok_or_else(|| ctx.err(&e("window"), format!("`{s}` is not upper-half, all or t0:t1")))?;
                        FitWindow::Range(a, b)
                    }
                };
                if times.len() < 3 {
                    return Err(ctx.err("t", "moment exponent needs at least 3 grid times"));
                }
                Plan::MomentExponent { x, p, target, method, window }
            }
            "intertwining" => {
                let f = ctx.function(&e("f"), &model)?;
                let x = x_of(&ctx)?;
                let v = ctx.tangent(&e("v"), &model, &x)?;
                let epsilons = ctx.list(&e("epsilons"), ctx.req(&e("epsilons"))?)?;
                if epsilons.iter().any(|h| !(*h > 0.0)) {
                    return Err(ctx.err(&e("epsilons"), "steps must be positive"));
                }
                Plan::Intertwining { f, x, v, epsilons, c_eps: ctx.f64(&e("c_eps"))? }
            }
            "grad_log_kernel" => {
                let (c, gamma) = match &model {
                    Model::Langevin(l) if l.dim == 1 => (l.c, l.gamma),
                    _ => return Err(ctx.err("manifold", "grad_log_kernel needs a one-dimensional langevin:c:gamma:1 model")),
                };
                let n_steps = ctx.u64(&e("n_steps"))?;
                if n_steps == 0 {
                    return Err(ctx.err(&e("n_steps"), "must be at least 1"));
                }
                Plan::GradLogKernel { c, gamma, x: ctx.f64(&e("x"))?, y: ctx.f64(&e("y"))?, n_steps }
            }
            "exit_tail" => {
                let x = x_of(&ctx)?;
                let region = ctx.region(&e("region"), &model)?;
                if !region.contains(&x) {
                    return Err(ctx.err(&e("x"), format!("start lies outside region `{}`", region.id())));
                }
                let window = match ctx.req(&e("window"))? {
                    "auto" => None,
                    _ => Some(ctx.u64(&e("window"))? as usize),
                };
                Plan::ExitTail { x, region, window }
            }
            "c0_probe" | "explosion" => {
                let k = e("starts");
                let starts = ctx
                    .req(&k)?
                    .split(';')
                    .map(|s| ctx.start(&k, s.trim(), &model, tol))
                    .collect::<Result<Vec<_>, _>>()?;
                if def.id == "c0_probe" {
                    Plan::C0Probe { region: ctx.region(&e("region"), &model)?, starts }
                } else {
                    let margin = ctx.f64(&e("margin"))?;
                    if !(margin > 0.0 && margin < 1.0) {
                        return Err(ctx.err(&e("margin"), "must lie in (0, 1)"));
                    }
                    Plan::Explosion { starts, margin }
                }
            }
            "ergodic_average" => {
                let compact = model.manifold().is_some_and(|m| m.is_compact());
                if !compact {
                    return Err(ctx.err("manifold", "ergodic_average needs a compact manifold model"));
                }
                Plan::Ergodic { x: x_of(&ctx)?, region: ctx.region(&e("region"), &model)? }
            }
            _ => unreachable!("estimator table and plan builder disagree"),
        };

        let check = match (ctx.get("check.target"), ctx.get("check.tolerance")) {
            (None, None) => {
                if ctx.get("check.row").is_some() {
                    return Err(ctx.err("check.row", "check.row needs check.target and check.tolerance"));
                }
                None
            }
            (Some(_), None) => return Err(SpecError::new(None, "check.tolerance", "required when check.target is set")),
            (None, Some(_)) => return Err(SpecError::new(None, "check.target", "required when check.tolerance is set")),
            (Some(_), Some(_)) => {
                let tolerance = ctx.f64("check.tolerance")?;
                if tolerance < 0.0 {
                    return Err(ctx.err("check.tolerance", "must be non-negative"));
                }
                Some(Check { row: ctx.get("check.row").unwrap_or("").to_string(), target: ctx.f64("check.target")?, tolerance })
            }
        };

        let mut values: BTreeMap<String, String> = raw.entries.iter().map(|(k, (v, _))| (k.clone(), v.clone())).collect();
        values.insert("t".into(), fmt_times(&times));
        Ok(ExperimentSpec {
            values,
            experiment,
            model,
            estimator: est_id,
            plan,
            flow,
            seed,
            n_paths,
            output,
            times,
            check,
        })
    }

    /// The resolved key/value lines, in a fixed order.
    pub fn resolved_text(&self) -> String {
        let mut out = String::new();
        for k in TOP_KEYS {
            if let Some(v) = self.values.get(*k) {
                out.push_str(&format!("{k} = {v}\n"));
            }
        }
        for (k, v) in &self.values {
            if k.starts_with("estimator.") {
                out.push_str(&format!("{k} = {v}\n"));
            }
        }
        out
    }
}
