//! Exit-time tails, entrance probabilities, explosion fractions and ergodic
//! averages.

use std::f64::consts::PI;

pub use crate::region::{ExitRule, RegionSpec, StopWhen};

use crate::error::{Error, Result};
use crate::estimators::{horizon, mc_semigroup_times, MonteCarloEstimate, Sampling};
use crate::flows::{run_path, FlowConfig, Model, PathStatus, StochasticSystem};
use crate::geometry::{Manifold, ManifoldModel};
use crate::linalg::Vector;
use crate::rng::BrownianDriver;
use crate::stats::binomial_stderr;

pub const REPORT_HEADER: &str = "probe,model,region,t,estimate,stderr,target,pass";

#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticRow {
    pub probe: String,
    pub model: String,
    pub region: String,
    pub t: f64,
    pub estimate: f64,
    pub stderr: f64,
    pub target: Option<f64>,
    pub pass: Option<bool>,
}

impl DiagnosticRow {
    pub fn csv_row(&self) -> String {
        let target = self.target.map_or(String::new(), |v| format!("{v:.16e}"));
        let pass = self.pass.map_or(String::new(), |p| p.to_string());
        format!(
            "{},{},{},{:.16e},{:.16e},{:.16e},{},{}",
            self.probe, self.model, self.region, self.t, self.estimate, self.stderr, target, pass
        )
    }
}

/// Stopping time per path (`None` when the path survives to `t_max`).
fn stop_times<S: StochasticSystem + ?Sized>(
    sys: &S,
    x: &Vector,
    cfg: &FlowConfig,
    sampling: &Sampling,
) -> Result<Vec<Option<f64>>> {
    sampling.collect(|i| {
        let mut d = BrownianDriver::new(sampling.seed, i, sys.noise_dim(), cfg.dt);
        let (status, _, _) = run_path(sys, x, &[], cfg, &mut d, |_| {})?;
        Ok(status.stop_time())
    })
}

fn fraction_by(times: &[Option<f64>], t: f64) -> f64 {
    let hit = times.iter().filter(|s| s.is_some_and(|s| s <= t + 1e-12)).count();
    hit as f64 / times.len() as f64
}

fn check_grid(times: &[f64]) -> Result<()> {
    if times.is_empty() {
        return Err(Error::invalid("time grid is empty"));
    }
    if times.windows(2).any(|w| !(w[1] > w[0])) || !(times[0] > 0.0) {
        return Err(Error::invalid("time grid must be positive and strictly increasing"));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct TailFit {
    pub model: String,
    pub region: String,
    pub times: Vec<f64>,
    /// `P̂{τ ≤ t}` on the grid.
    pub estimates: Vec<f64>,
    pub stderrs: Vec<f64>,
    /// Number of leading grid points in the fit window.
    pub window: usize,
    /// Least-squares `C` in `P ≈ C t²` over the window.
    pub c_fit: f64,
    /// `max P̂/t²` over the window.
    pub c_envelope: f64,
    /// Root of the summed squared fit residuals.
    pub residual: f64,
    pub pass: bool,
}

impl TailFit {
    pub fn rows(&self) -> Vec<DiagnosticRow> {
        (0..self.times.len())
            .map(|i| {
                let t = self.times[i];
                let target = self.c_fit * t * t;
                DiagnosticRow {
                    probe: "exit_tail".into(),
                    model: self.model.clone(),
                    region: self.region.clone(),
                    t,
                    estimate: self.estimates[i],
                    stderr: self.stderrs[i],
                    target: Some(target),
                    pass: (i < self.window).then(|| self.estimates[i] <= target + 3.0 * self.stderrs[i]),
                }
            })
            .collect()
    }
}

/// Empirical exit-time distribution from `region` with a `C t²` fit over
/// the smallest third of the grid.
pub fn exit_tail<S: StochasticSystem + ?Sized>(
    sys: &S,
    x: &Vector,
    region: &RegionSpec,
    times: &[f64],
    cfg: &FlowConfig,
    sampling: &Sampling,
) -> Result<TailFit> {
    let window = times.len().div_ceil(3).max(1);
    exit_tail_window(sys, x, region, times, window, cfg, sampling)
}

/// [`exit_tail`] with an explicit number of leading grid points in the fit.
pub fn exit_tail_window<S: StochasticSystem + ?Sized>(
    sys: &S,
    x: &Vector,
    region: &RegionSpec,
    times: &[f64],
    window: usize,
    cfg: &FlowConfig,
    sampling: &Sampling,
) -> Result<TailFit> {
    check_grid(times)?;
    if !region.contains(x) {
        return Err(Error::invalid(format!("start point lies outside region `{}`", region.id())));
    }
    if window == 0 || window > times.len() {
        return Err(Error::invalid("fit window must hold between 1 and all grid points"));
    }
    let c = horizon(cfg, *times.last().unwrap())?.with_exit(ExitRule::leave("region", region.clone()));
    let taus = stop_times(sys, x, &c, sampling)?;
    let estimates: Vec<f64> = times.iter().map(|&t| fraction_by(&taus, t)).collect();
    let stderrs: Vec<f64> = estimates.iter().map(|&p| binomial_stderr(p, sampling.n_paths)).collect();
    let (mut num, mut den, mut env) = (0.0, 0.0, 0.0f64);
    for i in 0..window {
        let t2 = times[i] * times[i];
        num += t2 * estimates[i];
        den += t2 * t2;
        env = env.max(estimates[i] / t2);
    }
    let c_fit = num / den;
    let residual = (0..window).map(|i| (estimates[i] - c_fit * times[i] * times[i]).powi(2)).sum::<f64>().sqrt();
    let pass = (0..window).all(|i| estimates[i] <= c_fit * times[i] * times[i] + 3.0 * stderrs[i]);
    Ok(TailFit {
        model: sys.id(),
        region: region.id(),
        times: times.to_vec(),
        estimates,
        stderrs,
        window,
        c_fit,
        c_envelope: env,
        residual,
        pass,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct EntranceEstimate {
    pub start: Vector,
    pub estimate: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct C0Report {
    pub model: String,
    pub region: String,
    pub t: f64,
    pub entries: Vec<EntranceEstimate>,
    /// Each estimate is at most the previous one plus 3 combined σ.
    pub non_increasing: bool,
}

impl C0Report {
    pub fn rows(&self) -> Vec<DiagnosticRow> {
        self.entries
            .iter()
            .map(|e| DiagnosticRow {
                probe: format!("c0_probe|x|={:.6}", e.start.norm()),
                model: self.model.clone(),
                region: self.region.clone(),
                t: self.t,
                estimate: e.estimate,
                stderr: e.stderr,
                target: None,
                pass: Some(self.non_increasing),
            })
            .collect()
    }
}

/// `P̂{T_K(x) ≤ t}` for each start. Starts inside `K` give 1.
pub fn c0_probe<S: StochasticSystem + ?Sized>(
    sys: &S,
    k: &RegionSpec,
    starts: &[Vector],
    t: f64,
    cfg: &FlowConfig,
    sampling: &Sampling,
) -> Result<C0Report> {
    let c = horizon(cfg, t)?.with_exit(ExitRule::enter("K", k.clone()));
    let mut entries = Vec::with_capacity(starts.len());
    for x in starts {
        if k.contains(x) {
            entries.push(EntranceEstimate { start: x.clone(), estimate: 1.0, stderr: 0.0 });
            continue;
        }
        let taus = sampling.collect(|i| {
            let mut d = BrownianDriver::new(sampling.seed, i, sys.noise_dim(), c.dt);
            let (status, _, _) = run_path(sys, x, &[], &c, &mut d, |_| {})?;
            Ok(matches!(status, PathStatus::Exited { .. }))
        })?;
        let p = taus.iter().filter(|&&h| h).count() as f64 / taus.len() as f64;
        entries.push(EntranceEstimate { start: x.clone(), estimate: p, stderr: binomial_stderr(p, sampling.n_paths) });
    }
    let non_increasing = entries.windows(2).all(|w| {
        let s = (w[0].stderr.powi(2) + w[1].stderr.powi(2)).sqrt();
        w[1].estimate <= w[0].estimate + 3.0 * s
    });
    Ok(C0Report { model: sys.id(), region: k.id(), t, entries, non_increasing })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExplosionRow {
    pub start: Vector,
    pub t: f64,
    pub fraction: f64,
    pub stderr: f64,
    /// Normal-approximation 95% interval, clipped to `[0, 1]`.
    pub ci: (f64, f64),
}

impl ExplosionRow {
    /// `fraction / stderr`, infinite when positive with zero stderr.
    pub fn z(&self) -> f64 {
        if self.stderr > 0.0 {
            self.fraction / self.stderr
        } else if self.fraction > 0.0 {
            f64::INFINITY
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExplosionReport {
    pub model: String,
    /// The region whose entry counts as explosion, if any.
    pub region: String,
    pub rows: Vec<ExplosionRow>,
}

impl ExplosionReport {
    pub fn diagnostic_rows(&self) -> Vec<DiagnosticRow> {
        self.rows
            .iter()
            .map(|r| DiagnosticRow {
                probe: "explosion_probe".into(),
                model: self.model.clone(),
                region: self.region.clone(),
                t: r.t,
                estimate: r.fraction,
                stderr: r.stderr,
                target: None,
                pass: None,
            })
            .collect()
    }
}

/// Default margin for the Taniguchi boundary: explosion is entry into
/// `{|x| > 1 − margin}`.
pub const TANIGUCHI_MARGIN: f64 = 1e-3;

/// The stopping set that stands for explosion on `model`, if it has one
/// beyond the explosion radius.
pub fn explosion_region(model: &Model, taniguchi_margin: f64) -> Option<RegionSpec> {
    match model {
        Model::Taniguchi(_) => Some(RegionSpec::ComplementOfBall { center: Vector::zeros(2), radius: 1.0 - taniguchi_margin }),
        Model::Gradient(m) => match m.manifold {
            Manifold::PuncturedPlane { hole } => Some(RegionSpec::centered_ball(2, hole)),
            _ => None,
        },
        _ => None,
    }
}

/// Fraction of paths stopped (exploded, retraction failure, or entering the
/// model's explosion region) by each time in `times`.
pub fn explosion_probe(
    model: &Model,
    starts: &[Vector],
    times: &[f64],
    taniguchi_margin: f64,
    cfg: &FlowConfig,
    sampling: &Sampling,
) -> Result<ExplosionReport> {
    check_grid(times)?;
    if let Model::Taniguchi(_) = model {
        if !(taniguchi_margin > 0.0 && taniguchi_margin < 1.0) {
            return Err(Error::invalid("taniguchi margin must lie in (0, 1)"));
        }
        if let Some(x) = starts.iter().find(|x| x.norm() >= 1.0) {
            return Err(Error::invalid(format!("taniguchi start {x:?} is not inside the unit disk")));
        }
    }
    let region = explosion_region(model, taniguchi_margin);
    let mut c = horizon(cfg, *times.last().unwrap())?;
    if let Some(r) = &region {
        c = c.with_exit(ExitRule::enter("explosion", r.clone()));
    }
    let sys = model.system();
    let mut rows = Vec::new();
    for x in starts {
        let taus = stop_times(sys, x, &c, sampling)?;
        for &t in times {
            let p = fraction_by(&taus, t);
            let se = binomial_stderr(p, sampling.n_paths);
            rows.push(ExplosionRow {
                start: x.clone(),
                t,
                fraction: p,
                stderr: se,
                ci: ((p - 1.96 * se).max(0.0), (p + 1.96 * se).min(1.0)),
            });
        }
    }
    Ok(ExplosionReport {
        model: sys.id(),
        region: region.map_or_else(|| format!("|x|>={}", c.explosion_radius), |r| r.id()),
        rows,
    })
}

/// A rectangle chart `(u, v) ↦ (point, area density)`.
struct Chart<'a> {
    u: (f64, f64),
    v: (f64, f64),
    map: Box<dyn Fn(f64, f64) -> (Vector, f64) + 'a>,
}

fn chart(m: &Manifold) -> Result<Chart<'_>> {
    match m {
        Manifold::FlatTorus { a, b } => {
            let (a, b) = (*a, *b);
            Ok(Chart {
                u: (-PI, PI),
                v: (-PI, PI),
                map: Box::new(move |p, q| {
                    (Vector::from([a * p.cos(), a * p.sin(), b * q.cos(), b * q.sin()]), a * b)
                }),
            })
        }
        Manifold::Sphere { dim: 2, .. } | Manifold::Torus { .. } => {
            let p = m.revolution_params().expect("surface of revolution");
            let u = p.s_range;
            Ok(Chart {
                u,
                v: (-PI, PI),
                map: Box::new(move |s, th| {
                    let w = (p.c1.f)(s) * (p.c1.df)(s).hypot((p.c2.df)(s));
                    (p.point(s, th), w)
                }),
            })
        }
        _ => Err(Error::Unsupported(format!("no quadrature chart for manifold `{}`", m.id()))),
    }
}

const GL5: [(f64, f64); 5] = [
    (-0.906_179_845_938_664, 0.236_926_885_056_189_1),
    (-0.538_469_310_105_683_1, 0.478_628_670_499_366_5),
    (0.0, 0.568_888_888_888_888_9),
    (0.538_469_310_105_683_1, 0.478_628_670_499_366_5),
    (0.906_179_845_938_664, 0.236_926_885_056_189_1),
];

fn gauss5<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> f64 {
    let (h, c) = (0.5 * (b - a), 0.5 * (a + b));
    GL5.iter().map(|(x, w)| w * f(c + h * x)).sum::<f64>() * h
}

/// `∫ f` over the part of `[a, b]` where `inside` holds. Membership is
/// sampled on a fine grid and each sign change is bisected to round-off, so
/// `f` is only ever integrated over smooth pieces.
fn masked_line<F: Fn(f64) -> f64, I: Fn(f64) -> bool>(f: &F, inside: &I, a: f64, b: f64) -> f64 {
    const CELLS: usize = 64;
    const SAMPLES: usize = 8;
    let n = CELLS * SAMPLES;
    let h = (b - a) / n as f64;
    let mut total = 0.0;
    let mut start = a;
    let mut state = inside(a);
    for i in 1..=n {
        let x = if i == n { b } else { a + i as f64 * h };
        let now = inside(x);
        if now != state {
            let (mut lo, mut hi) = (x - h, x);
            for _ in 0..60 {
                let m = 0.5 * (lo + hi);
                if inside(m) == state {
                    lo = m;
                } else {
                    hi = m;
                }
                if hi - lo <= 1e-15 * (1.0 + m.abs()) {
                    break;
                }
            }
            let root = 0.5 * (lo + hi);
            if state {
                total += piecewise(f, start, root, CELLS as f64 / (b - a));
            }
            start = root;
            state = now;
        }
    }
    if state {
        total += piecewise(f, start, b, CELLS as f64 / (b - a));
    }
    total
}

/// Composite five-point Gauss rule with about `density` panels per unit.
fn piecewise<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, density: f64) -> f64 {
    let panels = ((b - a) * density).ceil().max(1.0) as usize;
    let h = (b - a) / panels as f64;
    (0..panels).map(|k| gauss5(f, a + k as f64 * h, a + (k + 1) as f64 * h)).sum()
}

/// Adaptive Simpson returning the value and the summed Richardson error
/// estimates of the accepted panels.
fn simpson_with_error<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> (f64, f64) {
    #[allow(clippy::too_many_arguments)]
    fn rec<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> (f64, f64) {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || (depth < 46 && delta.abs() <= 15.0 * tol) {
            return (left + right + delta / 15.0, delta.abs() / 15.0);
        }
        let (l, el) = rec(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1);
        let (r, er) = rec(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1);
        (l + r, el + er)
    }
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    // at least four levels so a kink cannot hide between the first nodes
    rec(f, a, b, fa, fm, fb, whole, tol, 50)
}

/// `h`-volume ratio `∫_K e^{2h} / ∫_M e^{2h}` over a rectangle chart:
/// exact splitting at the boundary of `K` along `u`, adaptive Simpson in
/// `v`. Returns the ratio and an error estimate.
pub fn h_volume_ratio(model: &ManifoldModel, k: &RegionSpec, tol: f64) -> Result<(f64, f64)> {
    if model.extra_drift.is_some() {
        return Err(Error::Unsupported("invariant measure unknown with an extra drift".into()));
    }
    if !(tol > 0.0) {
        return Err(Error::invalid("quadrature tolerance must be positive"));
    }
    let ch = chart(&model.manifold)?;
    let weight = |u: f64, v: f64| {
        let (x, dens) = (ch.map)(u, v);
        dens * (2.0 * model.potential.value(&x)).exp()
    };
    let line = |v: f64, region: &RegionSpec| {
        masked_line(&|u| weight(u, v), &|u| region.contains(&(ch.map)(u, v).0), ch.u.0, ch.u.1)
    };
    let (total, e_total) = simpson_with_error(&|v| line(v, &RegionSpec::Everything), ch.v.0, ch.v.1, 1e-3 * tol);
    let (part, e_part) = simpson_with_error(&|v| line(v, k), ch.v.0, ch.v.1, 0.25 * tol * total);
    let ratio = part / total;
    Ok((ratio, (e_part + ratio * e_total) / total))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErgodicReport {
    pub model: String,
    pub region: String,
    pub estimates: Vec<MonteCarloEstimate>,
    /// `h-vol(K)/h-vol(M)` by quadrature.
    pub target: f64,
    pub quadrature_error: f64,
    pub pass: bool,
}

impl ErgodicReport {
    pub fn rows(&self) -> Vec<DiagnosticRow> {
        let last = self.estimates.len() - 1;
        self.estimates
            .iter()
            .enumerate()
            .map(|(i, e)| DiagnosticRow {
                probe: "ergodic_average".into(),
                model: self.model.clone(),
                region: self.region.clone(),
                t: e.t,
                estimate: e.value,
                stderr: e.stderr,
                target: Some(self.target),
                pass: (i == last).then_some(self.pass),
            })
            .collect()
    }
}

/// `P̂_t χ_K(x)` on the grid against `h-vol(K)/h-vol(M)`; passes when the
/// last estimate is within `3σ` plus the quadrature error of the target.
pub fn ergodic_average(
    model: &ManifoldModel,
    k: &RegionSpec,
    x: &Vector,
    times: &[f64],
    cfg: &FlowConfig,
    sampling: &Sampling,
) -> Result<ErgodicReport> {
    check_grid(times)?;
    if !model.manifold.is_compact() {
        return Err(Error::invalid(format!("manifold `{}` is not compact", model.manifold.id())));
    }
    let (target, qerr) = h_volume_ratio(model, k, 1e-6)?;
    let estimates = mc_semigroup_times(model, |y| if k.contains(y) { 1.0 } else { 0.0 }, x, times, cfg, sampling)?;
    let last = estimates.last().unwrap();
    let pass = (last.value - target).abs() <= 3.0 * last.stderr + qerr;
    Ok(ErgodicReport { model: model.id(), region: k.id(), estimates, target, quadrature_error: qerr, pass })
}
