//! Damped parallel transport along recorded paths and transport of curves
//! under a common noise realisation.

use super::{run_path, FlowConfig, PathStatus, StochasticSystem, TrajectoryRecord};
use crate::error::{Error, Result};
use crate::geometry::{Frame, ManifoldModel, TangentVector};
use crate::linalg::{operator_norm, Vector};
use crate::rng::NoiseSource;

fn damping(model: &ManifoldModel, x: &Vector, w: &Vector) -> Result<Vector> {
    let tv = TangentVector::new(x.clone(), w.clone());
    let ric = model.ricci_vector(&tv)?;
    let hess = model.hessian_potential_vector(&tv)?;
    Ok(&hess.components - &ric.components.scaled(0.5))
}

/// Solve `DW/dt = −½ Ric(W)^# + Hess h(W)^#` along a completed trajectory
/// recorded at stride 1. Each step applies the damping with a second-order
/// Runge–Kutta update at the current point, then transports to the next
/// point by tangent projection rescaled to preserve length.
pub fn damped_transport(model: &ManifoldModel, traj: &TrajectoryRecord, v0: &Vector) -> Result<Vec<TangentVector>> {
    if !traj.status.is_completed() {
        return Err(Error::IncompleteTrajectory(traj.status.label()));
    }
    if traj.points.len() < 2 {
        return Err(Error::IncompleteTrajectory("trajectory has no steps".into()));
    }
    let x0 = &traj.points[0];
    model.check_point(x0)?;
    let f0 = Frame::new(&model.manifold, x0);
    let nc = f0.normal_part(v0).norm();
    if nc > model.tolerance * v0.norm().max(1.0) {
        return Err(Error::NotTangent { normal_component: nc });
    }
    let dt0 = traj.times[1] - traj.times[0];
    let mut out = Vec::with_capacity(traj.points.len());
    let mut w = v0.clone();
    out.push(TangentVector::new(x0.clone(), w.clone()));
    for k in 0..traj.points.len() - 1 {
        let dt = traj.times[k + 1] - traj.times[k];
        if (dt - dt0).abs() > 1e-9 * dt0 {
            return Err(Error::invalid("damped transport needs a trajectory recorded at stride 1"));
        }
        let x = &traj.points[k];
        let d1 = damping(model, x, &w)?;
        let mid = &w + &d1.scaled(dt);
        let d2 = damping(model, x, &mid)?;
        let mut wd = w.clone();
        wd.axpy(0.5 * dt, &d1);
        wd.axpy(0.5 * dt, &d2);
        let xn = &traj.points[k + 1];
        let len = wd.norm();
        let p = Frame::new(&model.manifold, xn).project(&wd);
        let pn = p.norm();
        w = if pn > 0.0 { p * (len / pn) } else { p };
        out.push(TangentVector::new(xn.clone(), w.clone()));
    }
    Ok(out)
}

/// A curve sampled at equally spaced parameters, with tangent vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledCurve {
    pub points: Vec<Vector>,
    pub tangents: Vec<Vector>,
    pub ds: f64,
}

impl SampledCurve {
    /// Chord length of the polyline through `points`.
    pub fn polyline_length(points: &[Vector]) -> f64 {
        points.windows(2).map(|w| (&w[1] - &w[0]).norm()).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurveTransport {
    pub times: Vec<f64>,
    /// Polyline length of the transported sample points.
    pub lengths: Vec<f64>,
    /// Trapezoidal `Σ |T_{σ(s_i)} F_t| |σ'(s_i)| Δs`.
    pub bounds: Vec<f64>,
    /// Smallest ambient norm reached by any sample point up to each time.
    pub min_norms: Vec<f64>,
    /// First stopping event among the sample paths, if any.
    pub status: PathStatus,
}

/// Transport every sample point of `curve` by the same noise realisation.
/// `make_noise` must return identical streams on every call. Record times
/// are multiples of `cfg.record_stride` steps; after the first stopping
/// event the output is truncated to the times before it.
pub fn transport_curve<S, N, F>(sys: &S, curve: &SampledCurve, cfg: &FlowConfig, make_noise: F) -> Result<CurveTransport>
where
    S: StochasticSystem + ?Sized,
    N: NoiseSource,
    F: Fn() -> N,
{
    if curve.points.len() < 2 || curve.tangents.len() != curve.points.len() {
        return Err(Error::invalid("curve needs at least two points, each with a tangent"));
    }
    let n = cfg.n_steps()?;
    let stride = cfg.record_stride as u64;
    let n_rec = (n / stride) as usize + 1;
    let k_pts = curve.points.len();
    let mut pos: Vec<Vec<Vector>> = vec![Vec::with_capacity(k_pts); n_rec];
    let mut norms: Vec<Vec<f64>> = vec![Vec::with_capacity(k_pts); n_rec];
    let mut min_norm = vec![f64::INFINITY; n_rec];
    let mut first_stop: Option<PathStatus> = None;
    for (x0, tangent) in curve.points.iter().zip(&curve.tangents) {
        let basis = sys.tangent_basis(x0);
        let speed = sys.norm(x0, tangent);
        let mut noise = make_noise();
        pos[0].push(x0.clone());
        norms[0].push(speed);
        min_norm[0] = min_norm[0].min(x0.norm());
        let mut running_min = x0.norm();
        let (status, _, _) = run_path(sys, x0, &basis, cfg, &mut noise, |s| {
            running_min = running_min.min(s.x.norm());
            if (s.k + 1) % stride == 0 && s.stop.is_none() {
                let r = ((s.k + 1) / stride) as usize;
                pos[r].push(s.x.clone());
                norms[r].push(speed * operator_norm(s.vs, |u, v| sys.inner(s.x, u, v)));
                min_norm[r] = min_norm[r].min(running_min);
            }
        })?;
        if let Some(t) = status.stop_time() {
            if first_stop.as_ref().and_then(|s| s.stop_time()).map_or(true, |t0| t < t0) {
                first_stop = Some(status);
            }
        }
    }
    let mut out = CurveTransport {
        times: Vec::new(),
        lengths: Vec::new(),
        bounds: Vec::new(),
        min_norms: Vec::new(),
        status: first_stop.clone().unwrap_or(PathStatus::Completed),
    };
    for r in 0..n_rec {
        if pos[r].len() < k_pts {
            break;
        }
        let t = (r as u64 * stride) as f64 * cfg.dt;
        let w = &norms[r];
        let bound = curve.ds * (w.iter().sum::<f64>() - 0.5 * (w[0] + w[k_pts - 1]));
        out.times.push(t);
        out.lengths.push(SampledCurve::polyline_length(&pos[r]));
        out.bounds.push(bound);
        out.min_norms.push(min_norm[r]);
    }
    Ok(out)
}
