//! Monte Carlo estimators over independent driven paths.
//!
//! Every estimator evaluates one scalar per path with a
//! [`BrownianDriver`] keyed by `(seed, path_index)`, collects the values in
//! index order and reduces them pairwise, so results do not depend on the
//! number of worker threads. Paths that stop before `t` contribute zero.

mod functions;
mod kernel;
mod moments;

pub use functions::{exact_one_form, OneForm, TestFunction, FUNCTION_IDS};
pub use kernel::grad_log_heat_kernel_ou;
pub use moments::{moment_exponent, FitWindow, MomentExponentEstimate, MomentMethod, MomentOptions, MomentTarget};

use crate::error::{Error, Result};
use crate::exec::Executor;
use crate::flows::{fingerprint_of, run_path, FlowConfig, PathStatus, StochasticSystem, TrajectoryRecord};
use crate::linalg::Vector;
use crate::rng::BrownianDriver;
use crate::stats::{summarize, Welford};

/// Path count, seed and worker pool for one estimator call.
#[derive(Debug, Clone)]
pub struct Sampling {
    pub n_paths: u64,
    pub seed: u64,
    pub executor: Executor,
}

impl Sampling {
    pub fn new(n_paths: u64, seed: u64) -> Self {
        Sampling { n_paths, seed, executor: Executor::global() }
    }

    pub fn with_executor(mut self, executor: Executor) -> Self {
        self.executor = executor;
        self
    }

    pub fn with_paths(mut self, n_paths: u64) -> Self {
        self.n_paths = n_paths;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.n_paths == 0 {
            return Err(Error::invalid("n_paths must be at least 1"));
        }
        Ok(())
    }

    /// Run `job` for every path index and return the values in index order.
    pub(crate) fn collect<T, F>(&self, job: F) -> Result<Vec<T>>
    where
        T: Send,
        F: Fn(u64) -> Result<T> + Sync + Send,
    {
        self.validate()?;
        self.executor.map_paths(self.n_paths, job).into_iter().collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonteCarloEstimate {
    pub estimator: String,
    pub manifold: String,
    pub t: f64,
    pub value: f64,
    pub stderr: f64,
    pub n_paths: u64,
    pub seed: u64,
    /// Hash of the flow configuration and system id.
    pub fingerprint: String,
    /// Hash of the estimator parameters.
    pub params_hash: String,
}

pub const ESTIMATE_HEADER: &str = "estimator,manifold,params-hash,t,value,stderr,n_paths,seed";

impl MonteCarloEstimate {
    fn from_stats(w: &Welford, head: Head<'_>, sampling: &Sampling) -> Self {
        MonteCarloEstimate {
            estimator: head.estimator.to_string(),
            manifold: head.system.clone(),
            t: head.t,
            value: w.mean(),
            stderr: w.stderr(),
            n_paths: sampling.n_paths,
            seed: sampling.seed,
            fingerprint: head.fingerprint.clone(),
            params_hash: fingerprint_of(&format!("{}|{}", head.estimator, head.params)),
        }
    }

    /// `|self − other| / sqrt(σ₁² + σ₂²)`.
    pub fn z_score(&self, other: &MonteCarloEstimate) -> f64 {
        let s = (self.stderr.powi(2) + other.stderr.powi(2)).sqrt();
        let d = (self.value - other.value).abs();
        if s == 0.0 {
            if d == 0.0 { 0.0 } else { f64::INFINITY }
        } else {
            d / s
        }
    }

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{:.16e},{:.16e},{:.16e},{},{}",
            self.estimator, self.manifold, self.params_hash, self.t, self.value, self.stderr, self.n_paths, self.seed
        )
    }
}

struct Head<'a> {
    estimator: &'a str,
    system: String,
    t: f64,
    params: String,
    fingerprint: String,
}

impl<'a> Head<'a> {
    fn new<S: StochasticSystem + ?Sized>(estimator: &'a str, sys: &S, cfg: &FlowConfig, t: f64, params: String) -> Self {
        Head { estimator, system: sys.id(), t, params, fingerprint: cfg.fingerprint(&sys.id()) }
    }
}

/// `cfg` with its horizon cut to `t`, which must lie on the step grid.
pub(crate) fn horizon(cfg: &FlowConfig, t: f64) -> Result<FlowConfig> {
    if !(t > 0.0) {
        return Err(Error::invalid(format!("time {t} must be positive")));
    }
    if t > cfg.t_max * (1.0 + 1e-12) {
        return Err(Error::invalid(format!("time {t} exceeds flow.t_max {}", cfg.t_max)));
    }
    cfg.steps_to(t)?;
    let mut c = cfg.clone();
    c.t_max = t;
    Ok(c)
}

fn driver<S: StochasticSystem + ?Sized>(sys: &S, cfg: &FlowConfig, seed: u64, i: u64) -> BrownianDriver {
    BrownianDriver::new(seed, i, sys.noise_dim(), cfg.dt)
}

fn check_tangent<S: StochasticSystem + ?Sized>(sys: &S, x: &Vector, v: &Vector) -> Result<()> {
    if v.len() != sys.ambient_dim() {
        return Err(Error::DimensionMismatch { expected: sys.ambient_dim(), got: v.len() });
    }
    let off = (&sys.project_tangent(x, v) - v).norm();
    if off > 1e-8 * v.norm().max(1.0) {
        return Err(Error::NotTangent { normal_component: off });
    }
    Ok(())
}

/// `P_t f(x) = E f(F_t(x)) χ_{t<ξ}`.
pub fn mc_semigroup<S, F>(sys: &S, f: F, x: &Vector, t: f64, cfg: &FlowConfig, sampling: &Sampling) -> Result<MonteCarloEstimate>
where
    S: StochasticSystem + ?Sized,
    F: Fn(&Vector) -> f64 + Sync + Send,
{
    let c = horizon(cfg, t)?;
    let vals = sampling.collect(|i| {
        let mut d = driver(sys, &c, sampling.seed, i);
        let (status, xt, _) = run_path(sys, x, &[], &c, &mut d, |_| {})?;
        Ok(if status.is_completed() { f(&xt) } else { 0.0 })
    })?;
    let head = Head::new("mc_semigroup", sys, &c, t, format!("x={x:?}"));
    Ok(MonteCarloEstimate::from_stats(&summarize(&vals), head, sampling))
}

/// [`mc_semigroup`] at several grid times from one set of paths.
pub fn mc_semigroup_times<S, F>(
    sys: &S,
    f: F,
    x: &Vector,
    times: &[f64],
    cfg: &FlowConfig,
    sampling: &Sampling,
) -> Result<Vec<MonteCarloEstimate>>
where
    S: StochasticSystem + ?Sized,
    F: Fn(&Vector) -> f64 + Sync + Send,
{
    if times.is_empty() {
        return Err(Error::invalid("time grid is empty"));
    }
    let t_last = times.iter().cloned().fold(f64::MIN, f64::max);
    let c = horizon(cfg, t_last)?;
    let steps: Vec<u64> = times.iter().map(|&t| horizon(cfg, t).and_then(|_| c.steps_to(t))).collect::<Result<_>>()?;
    let per_path = sampling.collect(|i| {
        let mut d = driver(sys, &c, sampling.seed, i);
        let mut out = vec![0.0; steps.len()];
        run_path(sys, x, &[], &c, &mut d, |s| {
            if s.stop.is_none() {
                for (o, &k) in out.iter_mut().zip(&steps) {
                    if s.k + 1 == k {
                        *o = f(s.x);
                    }
                }
            }
        })?;
        Ok(out)
    })?;
    let mut res = Vec::with_capacity(times.len());
    for (j, &t) in times.iter().enumerate() {
        let col: Vec<f64> = per_path.iter().map(|r| r[j]).collect();
        let head = Head::new("mc_semigroup", sys, &c, t, format!("x={x:?}"));
        res.push(MonteCarloEstimate::from_stats(&summarize(&col), head, sampling));
    }
    Ok(res)
}

/// `δP_t φ(v) = E φ(T_x F_t v) χ_{t<ξ}`.
pub fn mc_delta_pt<S: StochasticSystem + ?Sized>(
    sys: &S,
    phi: &OneForm,
    x: &Vector,
    v: &Vector,
    t: f64,
    cfg: &FlowConfig,
    sampling: &Sampling,
) -> Result<MonteCarloEstimate> {
    let c = horizon(cfg, t)?;
    check_tangent(sys, x, v)?;
    let basis = [v.clone()];
    let vals = sampling.collect(|i| {
        let mut d = driver(sys, &c, sampling.seed, i);
        let (status, xt, vs) = run_path(sys, x, &basis, &c, &mut d, |_| {})?;
        Ok(if status.is_completed() { phi.evaluate(&xt, &vs[0]) } else { 0.0 })
    })?;
    let head = Head::new("mc_delta_pt", sys, &c, t, format!("phi={} x={x:?} v={v:?}", phi.label));
    Ok(MonteCarloEstimate::from_stats(&summarize(&vals), head, sampling))
}

/// Per-path Bismut weight `M_t = Σ ⟨ΔB_k, Y T F_{t_k} v⟩` (left-point sums)
/// together with the stopping status and end state.
fn bismut_path<S, N, O>(
    sys: &S,
    x: &Vector,
    v: &Vector,
    cfg: &FlowConfig,
    noise: &mut N,
    mut extra: O,
) -> Result<(PathStatus, Vector, f64)>
where
    S: StochasticSystem + ?Sized,
    N: crate::rng::NoiseSource + ?Sized,
    O: FnMut(&crate::flows::StepView<'_>),
{
    let mut m = 0.0;
    let mut elliptic = true;
    let (status, xt, _) = run_path(sys, x, std::slice::from_ref(v), cfg, noise, |s| {
        match sys.bismut_pairing(s.x_prev, &s.vs_prev[0], s.db) {
            Some(p) => m += p,
            None => elliptic = false,
        }
        extra(s);
    })?;
    if !elliptic {
        return Err(Error::Unsupported(format!("system `{}` is not elliptic; no Bismut weight", sys.id())));
    }
    Ok((status, xt, m))
}

fn elliptic_guard<S: StochasticSystem + ?Sized>(sys: &S, x: &Vector, v: &Vector) -> Result<()> {
    let z = vec![0.0; sys.noise_dim()];
    if sys.bismut_pairing(x, v, &z).is_none() {
        return Err(Error::Unsupported(format!("system `{}` is not elliptic; no Bismut weight", sys.id())));
    }
    Ok(())
}

/// `d(P_t f)(v) = (1/t) E f(x_t) M_t` with the discretised martingale
/// `M_t = Σ ⟨T F_{t_k} v, X(x_{t_k}) ΔB_k⟩`.
pub fn bismut_gradient<S, F>(
    sys: &S,
    f: F,
    x: &Vector,
    v: &Vector,
    t: f64,
    cfg: &FlowConfig,
    sampling: &Sampling,
) -> Result<MonteCarloEstimate>
where
    S: StochasticSystem + ?Sized,
    F: Fn(&Vector) -> f64 + Sync + Send,
{
    let c = horizon(cfg, t)?;
    check_tangent(sys, x, v)?;
    elliptic_guard(sys, x, v)?;
    let vals = sampling.collect(|i| {
        let mut d = driver(sys, &c, sampling.seed, i);
        let (status, xt, m) = bismut_path(sys, x, v, &c, &mut d, |_| {})?;
        Ok(if status.is_completed() { f(&xt) * m / t } else { 0.0 })
    })?;
    let head = Head::new("bismut_gradient", sys, &c, t, format!("x={x:?} v={v:?}"));
    Ok(MonteCarloEstimate::from_stats(&summarize(&vals), head, sampling))
}

/// Mean of the Bismut weight `M_t / t` itself; zero in expectation.
pub fn bismut_weight<S: StochasticSystem + ?Sized>(
    sys: &S,
    x: &Vector,
    v: &Vector,
    t: f64,
    cfg: &FlowConfig,
    sampling: &Sampling,
) -> Result<MonteCarloEstimate> {
    let c = horizon(cfg, t)?;
    check_tangent(sys, x, v)?;
    elliptic_guard(sys, x, v)?;
    let vals = sampling.collect(|i| {
        let mut d = driver(sys, &c, sampling.seed, i);
        let (_, _, m) = bismut_path(sys, x, v, &c, &mut d, |_| {})?;
        Ok(m / t)
    })?;
    let head = Head::new("bismut_weight", sys, &c, t, format!("x={x:?} v={v:?}"));
    Ok(MonteCarloEstimate::from_stats(&summarize(&vals), head, sampling))
}

/// `∫ φ∘dx = Σ φ_{x_k}(X(x_k) ΔB_k) − ½ Σ δ^hφ(x_k) Δt_k` along a recorded
/// trajectory. Records taken at a stride use the summed increments.
pub fn line_integral_one_form<S: StochasticSystem + ?Sized>(sys: &S, phi: &OneForm, traj: &TrajectoryRecord) -> Result<f64> {
    if !phi.has_codifferential() {
        return Err(Error::MissingCodifferential);
    }
    if traj.increments.len() + 1 != traj.points.len() {
        return Err(Error::invalid("trajectory has no recorded increments"));
    }
    let mut ito = 0.0;
    let mut corr = 0.0;
    for k in 0..traj.increments.len() {
        let x = &traj.points[k];
        let dt = traj.times[k + 1] - traj.times[k];
        ito += phi.evaluate(x, &sys.diffusion(x, &traj.increments[k]));
        corr += phi.codifferential(x)? * dt;
    }
    Ok(ito - 0.5 * corr)
}

/// `(1/t) E [∫φ∘dx] M_t` for a closed 1-form with codifferential.
pub fn bismut_one_form<S: StochasticSystem + ?Sized>(
    sys: &S,
    phi: &OneForm,
    x: &Vector,
    v: &Vector,
    t: f64,
    cfg: &FlowConfig,
    sampling: &Sampling,
) -> Result<MonteCarloEstimate> {
    if !phi.has_codifferential() {
        return Err(Error::MissingCodifferential);
    }
    let c = horizon(cfg, t)?;
    check_tangent(sys, x, v)?;
    elliptic_guard(sys, x, v)?;
    let vals = sampling.collect(|i| {
        let mut d = driver(sys, &c, sampling.seed, i);
        let mut l = 0.0;
        let (status, _, m) = bismut_path(sys, x, v, &c, &mut d, |s| {
            l += phi.evaluate(s.x_prev, &sys.diffusion(s.x_prev, s.db));
            l -= 0.5 * phi.codifferential(s.x_prev).unwrap_or(0.0) * c.dt;
        })?;
        Ok(if status.is_completed() { l * m / t } else { 0.0 })
    })?;
    let head = Head::new("bismut_one_form", sys, &c, t, format!("phi={} x={x:?} v={v:?}", phi.label));
    Ok(MonteCarloEstimate::from_stats(&summarize(&vals), head, sampling))
}

#[derive(Debug, Clone, PartialEq)]
pub struct FiniteDifference {
    pub epsilon: f64,
    pub estimate: MonteCarloEstimate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntertwiningReport {
    pub finite_differences: Vec<FiniteDifference>,
    pub delta_pt: MonteCarloEstimate,
    /// `None` for non-elliptic systems.
    pub bismut: Option<MonteCarloEstimate>,
    /// Largest `|a − b| − (3σ + C ε)` over compared pairs; `≤ 0` passes.
    pub worst_excess: f64,
    pub pass: bool,
}

pub const DEFAULT_EPSILONS: [f64; 2] = [1e-2, 1e-3];

/// Compare common-random-number finite differences of `P_t f`, `δP_t(df)`
/// and the Bismut estimate. Pairs pass when `|a − b| ≤ 3σ + c_eps·ε`, with
/// `ε = 0` for the pair not involving a difference quotient.
#[allow(clippy::too_many_arguments)]
pub fn intertwining_check<S: StochasticSystem + ?Sized>(
    sys: &S,
    f: &TestFunction,
    x: &Vector,
    v: &Vector,
    t: f64,
    epsilons: &[f64],
    c_eps: f64,
    cfg: &FlowConfig,
    sampling: &Sampling,
) -> Result<IntertwiningReport> {
    let c = horizon(cfg, t)?;
    check_tangent(sys, x, v)?;
    let f_ = f.clone();
    let df = OneForm::new(format!("d({f})"), move |y, w| f_.gradient(y).dot(w));
    let delta_pt = mc_delta_pt(sys, &df, x, v, t, &c, sampling)?;
    let bismut = match bismut_gradient(sys, |y| f.value(y), x, v, t, &c, sampling) {
        Ok(b) => Some(b),
        Err(Error::Unsupported(_)) => None,
        Err(e) => return Err(e),
    };
    let mut fds = Vec::new();
    for &eps in epsilons {
        if !(eps > 0.0) {
            return Err(Error::invalid("finite-difference step must be positive"));
        }
        let mut y = x.clone();
        y.axpy(eps, v);
        let xe = sys.retract(&y)?;
        let vals = sampling.collect(|i| {
            let mut d0 = driver(sys, &c, sampling.seed, i);
            let mut d1 = driver(sys, &c, sampling.seed, i);
            let (s0, x0t, _) = run_path(sys, x, &[], &c, &mut d0, |_| {})?;
            let (s1, x1t, _) = run_path(sys, &xe, &[], &c, &mut d1, |_| {})?;
            let a = if s0.is_completed() { f.value(&x0t) } else { 0.0 };
            let b = if s1.is_completed() { f.value(&x1t) } else { 0.0 };
            Ok((b - a) / eps)
        })?;
        let head = Head::new("finite_difference", sys, &c, t, format!("f={f} eps={eps} x={x:?} v={v:?}"));
        fds.push(FiniteDifference { epsilon: eps, estimate: MonteCarloEstimate::from_stats(&summarize(&vals), head, sampling) });
    }
    let excess = |a: &MonteCarloEstimate, b: &MonteCarloEstimate, eps: f64| {
        let s = (a.stderr.powi(2) + b.stderr.powi(2)).sqrt();
        (a.value - b.value).abs() - (3.0 * s + c_eps * eps)
    };
    let mut worst = f64::NEG_INFINITY;
    if let Some(b) = &bismut {
        worst = worst.max(excess(&delta_pt, b, 0.0));
    }
    for fd in &fds {
        worst = worst.max(excess(&fd.estimate, &delta_pt, fd.epsilon));
        if let Some(b) = &bismut {
            worst = worst.max(excess(&fd.estimate, b, fd.epsilon));
        }
    }
    Ok(IntertwiningReport { finite_differences: fds, delta_pt, bismut, worst_excess: worst, pass: worst <= 0.0 })
}
