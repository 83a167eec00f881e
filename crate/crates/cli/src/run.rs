//! Dispatch a resolved spec to the estimators and write its outputs.

use std::fs::OpenOptions;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use geomflow::diagnostics::{c0_probe, ergodic_average, exit_tail, exit_tail_window, explosion_probe, DiagnosticRow};
use geomflow::estimators::{
    bismut_gradient, bismut_one_form, bismut_weight, exact_one_form, grad_log_heat_kernel_ou, intertwining_check,
    mc_delta_pt, mc_semigroup_times, moment_exponent, MomentOptions, OneForm,
};
use geomflow::{Executor, Model, MonteCarloEstimate, Result, Sampling};

use crate::spec::{ExperimentSpec, Plan};

pub const CSV_HEADER: &str = "experiment,estimator,manifold,t,value,stderr,n_paths,seed";

pub const CODE_VERSION: &str = concat!("geomflow-cli ", env!("CARGO_PKG_VERSION"));

#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub estimator: String,
    pub manifold: String,
    pub t: f64,
    pub value: f64,
    pub stderr: f64,
    pub n_paths: u64,
    pub seed: u64,
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

impl ResultRow {
    fn from_estimate(name: &str, e: &MonteCarloEstimate) -> Self {
        ResultRow {
            estimator: name.to_string(),
            manifold: e.manifold.clone(),
            t: e.t,
            value: e.value,
            stderr: e.stderr,
            n_paths: e.n_paths,
            seed: e.seed,
        }
    }

    pub fn csv_line(&self, experiment: &str) -> String {
        format!(
            "{},{},{},{:.16e},{:.16e},{:.16e},{},{}",
            csv_field(experiment),
            csv_field(&self.estimator),
            csv_field(&self.manifold),
            self.t,
            self.value,
            self.stderr,
            self.n_paths,
            self.seed
        )
    }
}

/// Rows produced by one execution, with any numerical failure and the
/// pass flags reported by diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct Execution {
    pub rows: Vec<ResultRow>,
    pub failure: Option<String>,
    pub verdicts: Vec<(String, bool)>,
}

struct Sink<'a> {
    spec: &'a ExperimentSpec,
    rows: Vec<ResultRow>,
    verdicts: Vec<(String, bool)>,
}

impl Sink<'_> {
    fn est(&mut self, name: &str, e: &MonteCarloEstimate) {
        self.rows.push(ResultRow::from_estimate(name, e));
    }

    fn raw(&mut self, name: &str, t: f64, value: f64, stderr: f64) {
        self.rows.push(ResultRow {
            estimator: name.to_string(),
            manifold: self.spec.model.system().id(),
            t,
            value,
            stderr,
            n_paths: self.spec.n_paths,
            seed: self.spec.seed,
        });
    }

    fn diag(&mut self, rows: &[DiagnosticRow]) {
        for r in rows {
            self.raw(&r.probe, r.t, r.estimate, r.stderr);
        }
    }
}

fn d_of(model: &Model, f: &geomflow::TestFunction) -> Result<OneForm> {
    exact_one_form(f, model)
}

fn dispatch(spec: &ExperimentSpec, sampling: &Sampling, out: &mut Sink<'_>) -> Result<()> {
    let sys = spec.model.system();
    let cfg = &spec.flow;
    let times = &spec.times;
    match &spec.plan {
        Plan::Semigroup { f, x } => {
            for e in mc_semigroup_times(sys, |y| f.value(y), x, times, cfg, sampling)? {
                out.est("semigroup", &e);
            }
        }
        Plan::DeltaPt { f, x, v } => {
            let df = d_of(&spec.model, f)?;
            for &t in times {
                out.est("delta_pt", &mc_delta_pt(sys, &df, x, v, t, cfg, sampling)?);
            }
        }
        Plan::BismutGradient { f, x, v } => {
            for &t in times {
                out.est("bismut_gradient", &bismut_gradient(sys, |y| f.value(y), x, v, t, cfg, sampling)?);
            }
        }
        Plan::BismutOneForm { f, x, v } => {
            let df = d_of(&spec.model, f)?;
            for &t in times {
                out.est("bismut_one_form", &bismut_one_form(sys, &df, x, v, t, cfg, sampling)?);
            }
        }
        Plan::BismutWeight { x, v } => {
            for &t in times {
                out.est("bismut_weight", &bismut_weight(sys, x, v, t, cfg, sampling)?);
            }
        }
        Plan::MomentExponent { x, p, target, method, window } => {
            let opts = MomentOptions { target: target.clone(), method: *method, window: *window };
            let r = moment_exponent(sys, x, *p, times, &opts, cfg, sampling)?;
            for (i, &t) in r.times.iter().enumerate() {
                out.raw("log_moment", t, r.log_moments[i], r.log_moment_stderrs[i]);
            }
            let t_end = r.times[*r.window.last().unwrap()];
            out.raw("moment_exponent", t_end, r.slope, r.slope_stderr);
        }
        Plan::Intertwining { f, x, v, epsilons, c_eps } => {
            for &t in times {
                let r = intertwining_check(sys, f, x, v, t, epsilons, *c_eps, cfg, sampling)?;
                for fd in &r.finite_differences {
                    out.est(&format!("finite_difference:eps={:?}", fd.epsilon), &fd.estimate);
                }
                out.est("delta_pt", &r.delta_pt);
                if let Some(b) = &r.bismut {
                    out.est("bismut_gradient", b);
                }
                out.raw("intertwining_excess", t, r.worst_excess, 0.0);
                out.verdicts.push((format!("intertwining t={t:?}"), r.pass));
            }
        }
        Plan::GradLogKernel { c, gamma, x, y, n_steps } => {
            for &t in times {
                let mut e = grad_log_heat_kernel_ou(*c, *gamma, *x, *y, t, *n_steps, sampling)?;
                e.manifold = sys.id();
                out.est("grad_log_kernel", &e);
            }
        }
        Plan::ExitTail { x, region, window } => {
            let fit = match window {
                None => exit_tail(sys, x, region, times, cfg, sampling)?,
                Some(w) => exit_tail_window(sys, x, region, times, *w, cfg, sampling)?,
            };
            out.diag(&fit.rows());
            let t_end = *times.last().unwrap();
            out.raw("exit_tail.c_fit", t_end, fit.c_fit, 0.0);
            out.raw("exit_tail.c_envelope", t_end, fit.c_envelope, 0.0);
            out.raw("exit_tail.residual", t_end, fit.residual, 0.0);
            out.verdicts.push(("exit_tail".into(), fit.pass));
        }
        Plan::C0Probe { region, starts } => {
            for &t in times {
                let r = c0_probe(sys, region, starts, t, cfg, sampling)?;
                out.diag(&r.rows());
                out.verdicts.push((format!("c0_probe t={t:?} non-increasing"), r.non_increasing));
            }
        }
        Plan::Explosion { starts, margin } => {
            let r = explosion_probe(&spec.model, starts, times, *margin, cfg, sampling)?;
            let per = times.len();
            for (i, row) in r.rows.iter().enumerate() {
                out.raw(&format!("explosion_probe:start={}", i / per), row.t, row.fraction, row.stderr);
            }
        }
        Plan::Ergodic { x, region } => {
            let m = match &spec.model {
                Model::Gradient(m) => m,
                _ => unreachable!("checked while resolving"),
            };
            let r = ergodic_average(m, region, x, times, cfg, sampling)?;
            for e in &r.estimates {
                out.est("ergodic_average", e);
            }
            out.raw("h_volume_ratio", *times.last().unwrap(), r.target, r.quadrature_error);
            out.verdicts.push(("ergodic_average".into(), r.pass));
        }
    }
    Ok(())
}

/// Run the plan. A numerical failure keeps the rows computed so far and
/// appends a `failed` status row.
pub fn execute(spec: &ExperimentSpec, executor: Executor) -> Execution {
    let sampling = Sampling::new(spec.n_paths, spec.seed).with_executor(executor);
    let mut sink = Sink { spec, rows: Vec::new(), verdicts: Vec::new() };
    let failure = match dispatch(spec, &sampling, &mut sink) {
        Ok(()) => None,
        Err(e) => {
            let msg = e.to_string();
            sink.raw(&format!("failed:{}", spec.estimator), f64::NAN, f64::NAN, f64::NAN);
            Some(msg)
        }
    };
    Execution { rows: sink.rows, failure, verdicts: sink.verdicts }
}

pub fn csv_text(experiment: &str, rows: &[ResultRow]) -> String {
    let mut s = String::from(CSV_HEADER);
    s.push('\n');
    for r in rows {
        s.push_str(&r.csv_line(experiment));
        s.push('\n');
    }
    s
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub description: String,
    pub pass: bool,
}

/// Evaluate `check.*` and every diagnostic pass flag.
pub fn checks(spec: &ExperimentSpec, ex: &Execution) -> Vec<CheckResult> {
    let mut out: Vec<CheckResult> =
        ex.verdicts.iter().map(|(d, p)| CheckResult { description: d.clone(), pass: *p }).collect();
    if let Some(c) = &spec.check {
        let row = if c.row.is_empty() { ex.rows.last() } else { ex.rows.iter().rev().find(|r| r.estimator == c.row) };
        match row {
            Some(r) => {
                let pass = (r.value - c.target).abs() <= c.tolerance;
                out.push(CheckResult {
                    description: format!("{} = {:.6} vs target {} ± {}", r.estimator, r.value, c.target, c.tolerance),
                    pass,
                });
            }
            None => out.push(CheckResult { description: format!("no row `{}` to check", c.row), pass: false }),
        }
    }
    out
}

#[derive(Debug)]
pub enum RunError {
    Io(PathBuf, std::io::Error),
    Collision(PathBuf),
    Invalid(String),
}

impl std::fmt::Display for RunError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RunError::Io(p, e) => write!(f, "{}: {e}", p.display()),
            RunError::Collision(p) => write!(f, "{} already exists; outputs are write-once per experiment id", p.display()),
            RunError::Invalid(m) => write!(f, "{m}"),
        }
    }
}

impl std::error::Error for RunError {}

#[derive(Debug)]
pub struct RunReport {
    pub execution: Execution,
    pub checks: Vec<CheckResult>,
    pub csv_path: PathBuf,
    pub manifest_path: PathBuf,
}

pub fn output_paths(spec: &ExperimentSpec) -> (PathBuf, PathBuf) {
    let dir = &spec.output;
    (dir.join(format!("{}.csv", spec.experiment)), dir.join(format!("{}.manifest", spec.experiment)))
}

fn write_new(path: &Path, text: &str) -> std::result::Result<(), RunError> {
    let mut f = OpenOptions::new().write(true).create_new(true).open(path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::AlreadyExists {
            RunError::Collision(path.to_path_buf())
        } else {
            RunError::Io(path.to_path_buf(), e)
        }
    })?;
    f.write_all(text.as_bytes()).map_err(|e| RunError::Io(path.to_path_buf(), e))
}

pub fn manifest_text(spec: &ExperimentSpec, ex: &Execution, threads: usize, wall: f64) -> String {
    let status = match &ex.failure {
        None => "complete".to_string(),
        Some(m) => format!("failed: {m}"),
    };
    format!(
        "# geomflow run manifest; the key lines below re-run this experiment\n\
         # code_version = {CODE_VERSION}\n\
         # flow_fingerprint = {}\n\
         # threads = {threads}\n\
         # wall_time_s = {wall:.3}\n\
         # status = {status}\n\
         # rows = {}\n\
         {}",
        spec.flow.fingerprint(&spec.model.system().id()),
        ex.rows.len(),
        spec.resolved_text()
    )
}

/// Execute `spec` and write `<output>/<experiment>.csv` and `.manifest`.
/// Existing files are never overwritten.
pub fn run_to_dir(spec: &ExperimentSpec, executor: Executor) -> std::result::Result<RunReport, RunError> {
    let (csv_path, manifest_path) = output_paths(spec);
    std::fs::create_dir_all(&spec.output).map_err(|e| RunError::Io(spec.output.clone(), e))?;
    for p in [&csv_path, &manifest_path] {
        if p.exists() {
            return Err(RunError::Collision(p.clone()));
        }
    }
    let threads = executor.threads();
    let start = Instant::now();
    let execution = execute(spec, executor);
    let wall = start.elapsed().as_secs_f64();
    write_new(&csv_path, &csv_text(&spec.experiment, &execution.rows))?;
    write_new(&manifest_path, &manifest_text(spec, &execution, threads, wall))?;
    let checks = checks(spec, &execution);
    Ok(RunReport { execution, checks, csv_path, manifest_path })
}

/// `--threads`, then `GEOMFLOW_THREADS`, then rayon's default pool.
pub fn executor_for(threads: Option<usize>) -> std::result::Result<Executor, RunError> {
    let n = match threads {
        Some(n) => Some(n),
        None => match std::env::var("GEOMFLOW_THREADS") {
            Ok(s) if !s.trim().is_empty() => Some(
                s.trim()
                    .parse::<usize>()
                    .map_err(|_| RunError::Invalid(format!("GEOMFLOW_THREADS = `{s}` is not a thread count")))?,
            ),
            _ => None,
        },
    };
    match n {
        None => Ok(Executor::global()),
        Some(n) => Executor::with_threads(n).map_err(|e| RunError::Invalid(e.to_string())),
    }
}
