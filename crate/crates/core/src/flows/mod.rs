//! Path integration of Stratonovich systems and their derivative flows.
//!
//! One step is an Euler–Heun predictor–corrector in ambient coordinates
//! followed by the model's retraction. Jacobian vectors follow the exact
//! linearisation of that discrete map, so finite differences of the
//! discrete flow agree with it to second order in the perturbation.

mod dump;
mod systems;
mod transport;

pub use dump::{write_trajectories, TRAJECTORY_HEADER};
pub use systems::{ConstantDrift, HyperbolicPlane, Langevin, Model, StochasticSystem, Taniguchi, MODEL_IDS};
pub use transport::{damped_transport, transport_curve, CurveTransport, SampledCurve};

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::geometry::{Frame, ManifoldModel};
use crate::linalg::{operator_norm, Vector};
use crate::region::ExitRule;
use crate::rng::NoiseSource;

#[derive(Debug, Clone, PartialEq)]
pub struct FlowConfig {
    pub dt: f64,
    pub t_max: f64,
    /// Paths whose ambient norm reaches this bound are flagged exploded.
    pub explosion_radius: f64,
    pub retraction_tolerance: f64,
    pub exit_sets: Vec<ExitRule>,
    pub record_jacobian: bool,
    pub record_stride: usize,
}

impl Default for FlowConfig {
    fn default() -> Self {
        FlowConfig {
            dt: 1e-3,
            t_max: 1.0,
            explosion_radius: 1e6,
            retraction_tolerance: 1e-10,
            exit_sets: Vec::new(),
            record_jacobian: false,
            record_stride: 1,
        }
    }
}

impl FlowConfig {
    pub fn new(dt: f64, t_max: f64) -> Self {
        FlowConfig { dt, t_max, ..Default::default() }
    }

    pub fn with_exit(mut self, rule: ExitRule) -> Self {
        self.exit_sets.push(rule);
        self
    }

    pub fn with_explosion_radius(mut self, r: f64) -> Self {
        self.explosion_radius = r;
        self
    }

    pub fn with_stride(mut self, stride: usize) -> Self {
        self.record_stride = stride;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::invalid(format!("flow.dt must be positive, got {}", self.dt)));
        }
        if !(self.t_max >= self.dt) {
            return Err(Error::invalid(format!("flow.t_max = {} is smaller than flow.dt = {}", self.t_max, self.dt)));
        }
        if !(self.explosion_radius > 0.0) {
            return Err(Error::invalid("flow.explosion_radius must be positive"));
        }
        if !(self.retraction_tolerance > 0.0) {
            return Err(Error::invalid("flow.retraction_tolerance must be positive"));
        }
        if self.record_stride == 0 {
            return Err(Error::invalid("flow.record_stride must be at least 1"));
        }
        Ok(())
    }

    /// Number of steps to reach `t`; `t` must be a multiple of `dt` up to
    /// round-off.
    pub fn steps_to(&self, t: f64) -> Result<u64> {
        let k = (t / self.dt).round();
        if (k * self.dt - t).abs() > 1e-9 * t.abs().max(1.0) || k < 0.0 {
            return Err(Error::invalid(format!("time {t} is not on the step grid of dt = {}", self.dt)));
        }
        Ok(k as u64)
    }

    pub fn n_steps(&self) -> Result<u64> {
        self.steps_to(self.t_max)
    }

    pub fn canonical(&self) -> String {
        let exits: Vec<String> = self
            .exit_sets
            .iter()
            .map(|e| format!("{}:{:?}:{}", e.name, e.when, e.region.id()))
            .collect();
        format!(
            "dt={:e};t_max={:e};R={:e};tol={:e};exits=[{}];jac={};stride={}",
            self.dt,
            self.t_max,
            self.explosion_radius,
            self.retraction_tolerance,
            exits.join("|"),
            self.record_jacobian,
            self.record_stride
        )
    }

    /// Hex prefix of the SHA-256 of the system id and canonical config.
    pub fn fingerprint(&self, system_id: &str) -> String {
        fingerprint_of(&format!("{system_id};{}", self.canonical()))
    }
}

pub fn fingerprint_of(s: &str) -> String {
    let digest = Sha256::digest(s.as_bytes());
    digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub enum PathStatus {
    Completed,
    Exploded { t: f64 },
    Exited { region: String, t: f64 },
    RetractionFailed { t: f64 },
}

impl PathStatus {
    pub fn is_completed(&self) -> bool {
        matches!(self, PathStatus::Completed)
    }

    /// Stopping time, or `None` for completed paths.
    pub fn stop_time(&self) -> Option<f64> {
        match self {
            PathStatus::Completed => None,
            PathStatus::Exploded { t } | PathStatus::Exited { t, .. } | PathStatus::RetractionFailed { t } => Some(*t),
        }
    }

    pub fn label(&self) -> String {
        match self {
            PathStatus::Completed => "completed".into(),
            PathStatus::Exploded { .. } => "exploded".into(),
            PathStatus::Exited { region, .. } => format!("exited:{region}"),
            PathStatus::RetractionFailed { .. } => "retraction_failed".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord {
    pub path_index: u64,
    pub seed: u64,
    pub times: Vec<f64>,
    pub points: Vec<Vector>,
    /// `increments[k]` is the Brownian increment between `times[k]` and
    /// `times[k + 1]` (summed over the steps in between).
    pub increments: Vec<Vector>,
    pub status: PathStatus,
    /// Tangent basis at the start whose images are recorded.
    pub basis: Vec<Vector>,
    /// Images of `basis` at each recorded time strictly before a stopping
    /// event.
    pub jacobian_frames: Option<Vec<Vec<Vector>>>,
}

impl TrajectoryRecord {
    pub fn final_point(&self) -> &Vector {
        self.points.last().expect("records hold the starting point")
    }

    pub fn final_time(&self) -> f64 {
        *self.times.last().expect("records hold the starting time")
    }
}

/// One Euler–Heun step followed by retraction. Returns the new point and
/// the advanced tangent vectors, each projected to the new tangent space.
pub fn step<S: StochasticSystem + ?Sized>(
    sys: &S,
    x: &Vector,
    vs: &[Vector],
    db: &[f64],
    dt: f64,
) -> Result<(Vector, Vec<Vector>)> {
    let k1 = sys.rate(x, db, dt);
    let xs = x + &k1;
    let k2 = sys.rate(&xs, db, dt);
    let mut y = x.clone();
    y.axpy(0.5, &(&k1 + &k2));
    let xn = sys.retract(&y)?;
    let mut out = Vec::with_capacity(vs.len());
    for v in vs {
        let l1 = sys.tangent_rate(x, v, db, dt);
        let vs_pred = v + &l1;
        let l2 = sys.tangent_rate(&xs, &vs_pred, db, dt);
        let mut w = v.clone();
        w.axpy(0.5, &(&l1 + &l2));
        let dv = sys.retract_jvp(&y, &xn, &w);
        out.push(sys.project_tangent(&xn, &dv));
    }
    Ok((xn, out))
}

/// Euler–Maruyama step with the covariant Itô drift correction
/// `½ Σ_i ∇X^i(X^i)`, followed by the closest-point retraction.
pub fn ito_step(model: &ManifoldModel, x: &Vector, db: &[f64], dt: f64) -> Result<Vector> {
    let f = Frame::new(&model.manifold, x);
    let m = x.len();
    let mut corr = Vector::zeros(m);
    for i in 0..m {
        let xi = f.project(&Vector::basis(m, i));
        corr += &f.nabla_x(&xi, i);
    }
    let mut y = x + &f.project(&Vector::from_slice(db));
    y.axpy(dt, &StochasticSystem::drift(model, x));
    y.axpy(0.5 * dt, &corr);
    model.retract(&y)
}

/// The state handed to a path observer after each accepted step.
pub struct StepView<'a> {
    /// Index of the step just taken (zero-based); the state is at
    /// `t = (k + 1) dt`.
    pub k: u64,
    pub t: f64,
    pub x_prev: &'a Vector,
    pub vs_prev: &'a [Vector],
    pub db: &'a [f64],
    pub x: &'a Vector,
    pub vs: &'a [Vector],
    /// Set when this step ends the path; the state is the stopping point.
    pub stop: Option<&'a PathStatus>,
}

/// Integrate one path to `cfg.t_max` or the first stopping event, calling
/// `observe` after every step. Returns the final status and state.
pub fn run_path<S, N, O>(
    sys: &S,
    x0: &Vector,
    basis: &[Vector],
    cfg: &FlowConfig,
    noise: &mut N,
    mut observe: O,
) -> Result<(PathStatus, Vector, Vec<Vector>)>
where
    S: StochasticSystem + ?Sized,
    N: NoiseSource + ?Sized,
    O: FnMut(&StepView<'_>),
{
    cfg.validate()?;
    if noise.dim() != sys.noise_dim() {
        return Err(Error::DimensionMismatch { expected: sys.noise_dim(), got: noise.dim() });
    }
    if (noise.dt() - cfg.dt).abs() > 1e-12 * cfg.dt {
        return Err(Error::invalid(format!("noise step {} differs from flow.dt {}", noise.dt(), cfg.dt)));
    }
    sys.check_start(x0, cfg.retraction_tolerance)?;
    let n = cfg.n_steps()?;
    let mut x = x0.clone();
    let mut vs: Vec<Vector> = basis.to_vec();
    let mut db = vec![0.0; sys.noise_dim()];
    for k in 0..n {
        noise.fill(k, &mut db);
        let t = (k + 1) as f64 * cfg.dt;
        let (xn, vn) = match step(sys, &x, &vs, &db, cfg.dt) {
            Ok(r) => r,
            Err(Error::RetractionFailed { .. }) => return Ok((PathStatus::RetractionFailed { t }, x, vs)),
            Err(e) => return Err(e),
        };
        let mut status = None;
        if xn.norm() >= cfg.explosion_radius {
            status = Some(PathStatus::Exploded { t });
        } else if sys.residual(&xn) > cfg.retraction_tolerance {
            status = Some(PathStatus::RetractionFailed { t });
        } else if let Some(r) = cfg.exit_sets.iter().find(|r| r.triggered(&xn)) {
            status = Some(PathStatus::Exited { region: r.name.clone(), t });
        }
        observe(&StepView { k, t, x_prev: &x, vs_prev: &vs, db: &db, x: &xn, vs: &vn, stop: status.as_ref() });
        x = xn;
        vs = vn;
        if let Some(s) = status {
            return Ok((s, x, vs));
        }
    }
    Ok((PathStatus::Completed, x, vs))
}

fn integrate_impl<S, N>(
    sys: &S,
    x0: &Vector,
    basis: &[Vector],
    cfg: &FlowConfig,
    noise: &mut N,
    path_index: u64,
    seed: u64,
) -> Result<TrajectoryRecord>
where
    S: StochasticSystem + ?Sized,
    N: NoiseSource + ?Sized,
{
    let stride = cfg.record_stride as u64;
    let want_jac = !basis.is_empty();
    let mut rec = TrajectoryRecord {
        path_index,
        seed,
        times: vec![0.0],
        points: vec![x0.clone()],
        increments: Vec::new(),
        status: PathStatus::Completed,
        basis: basis.to_vec(),
        jacobian_frames: want_jac.then(|| vec![basis.to_vec()]),
    };
    let mut acc = vec![0.0; sys.noise_dim()];
    let n = cfg.n_steps()?;
    let (status, _, _) = run_path(sys, x0, basis, cfg, noise, |s| {
        for (a, b) in acc.iter_mut().zip(s.db) {
            *a += b;
        }
        if (s.k + 1) % stride == 0 || s.k + 1 == n || s.stop.is_some() {
            rec.times.push(s.t);
            rec.points.push(s.x.clone());
            rec.increments.push(Vector::from_slice(&acc));
            acc.iter_mut().for_each(|a| *a = 0.0);
            if s.stop.is_none() {
                if let Some(f) = rec.jacobian_frames.as_mut() {
                    f.push(s.vs.to_vec());
                }
            }
        }
    })?;
    rec.status = status;
    Ok(rec)
}

pub fn integrate_path<S, N>(sys: &S, x0: &Vector, cfg: &FlowConfig, noise: &mut N) -> Result<TrajectoryRecord>
where
    S: StochasticSystem + ?Sized,
    N: NoiseSource + ?Sized,
{
    integrate_impl(sys, x0, &[], cfg, noise, 0, 0)
}

/// As [`integrate_path`], with the images of `basis` under the derivative
/// flow recorded at the record stride.
pub fn integrate_with_jacobian<S, N>(
    sys: &S,
    x0: &Vector,
    basis: &[Vector],
    cfg: &FlowConfig,
    noise: &mut N,
) -> Result<TrajectoryRecord>
where
    S: StochasticSystem + ?Sized,
    N: NoiseSource + ?Sized,
{
    if basis.is_empty() {
        return Err(Error::invalid("jacobian integration needs a non-empty tangent basis"));
    }
    for v in basis {
        let off = (&sys.project_tangent(x0, v) - v).norm();
        if off > 1e-10 * v.norm().max(1.0) {
            return Err(Error::NotTangent { normal_component: off });
        }
    }
    integrate_impl(sys, x0, basis, cfg, noise, 0, 0)
}

/// Integrate with a [`crate::rng::BrownianDriver`] so the record carries its
/// seed and path index.
pub fn integrate_driven<S: StochasticSystem + ?Sized>(
    sys: &S,
    x0: &Vector,
    basis: &[Vector],
    cfg: &FlowConfig,
    seed: u64,
    path_index: u64,
) -> Result<TrajectoryRecord> {
    let mut d = crate::rng::BrownianDriver::new(seed, path_index, sys.noise_dim(), cfg.dt);
    integrate_impl(sys, x0, basis, cfg, &mut d, path_index, seed)
}

/// Operator norm of the derivative flow from the images of a basis that is
/// orthonormal at the start (`x0`) into the metric at `x`.
pub fn jacobian_norm<S: StochasticSystem + ?Sized>(sys: &S, x: &Vector, images: &[Vector]) -> f64 {
    operator_norm(images, |u, v| sys.inner(x, u, v))
}
