//! Moment exponents `μ_x(p) = lim (1/t) log E|T_x F_t|^p` by least squares.

use super::{driver, horizon, Sampling};
use crate::error::{Error, Result};
use crate::flows::{jacobian_norm, run_path, FlowConfig, StochasticSystem};
use crate::linalg::Vector;
use crate::stats::{ols, summarize};

#[derive(Debug, Clone, PartialEq)]
pub enum MomentTarget {
    /// Operator norm of `T_x F_t`.
    OperatorNorm,
    /// `|T_x F_t v| / |v|` for a fixed tangent `v`.
    Direction(Vector),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MomentMethod {
    /// `log` of the sample mean of `|TF|^p χ`.
    SampleMean,
    /// `p m + p² s²/2 + log q` from the mean `m` and variance `s²` of
    /// `log|TF|` over the surviving fraction `q`.
    LogNormal,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FitWindow {
    UpperHalf,
    All,
    /// Grid times in `[t0, t1]`.
    Range(f64, f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct MomentOptions {
    pub target: MomentTarget,
    pub method: MomentMethod,
    pub window: FitWindow,
}

impl Default for MomentOptions {
    fn default() -> Self {
        MomentOptions { target: MomentTarget::OperatorNorm, method: MomentMethod::SampleMean, window: FitWindow::UpperHalf }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MomentExponentEstimate {
    pub p: f64,
    pub times: Vec<f64>,
    pub method: MomentMethod,
    /// Estimates of `log E|T_x F_t|^p` by `method`.
    pub log_moments: Vec<f64>,
    pub log_moment_stderrs: Vec<f64>,
    pub sample_mean_log_moments: Vec<f64>,
    pub lognormal_log_moments: Vec<f64>,
    /// Surviving paths at each time.
    pub survivors: Vec<u64>,
    /// Indices of the grid points used in the fit.
    pub window: Vec<usize>,
    pub slope: f64,
    pub intercept: f64,
    pub slope_stderr: f64,
    pub slope_ci: (f64, f64),
    pub strongly_moment_stable_candidate: bool,
    pub n_paths: u64,
    pub seed: u64,
    pub fingerprint: String,
}

fn window_indices(times: &[f64], w: FitWindow) -> Vec<usize> {
    match w {
        FitWindow::All => (0..times.len()).collect(),
        FitWindow::UpperHalf => (times.len() / 2..times.len()).collect(),
        FitWindow::Range(a, b) => (0..times.len()).filter(|&i| times[i] >= a && times[i] <= b).collect(),
    }
}

/// Estimate `log E|T_x F_t|^p` on `times` and fit its slope over the
/// window. The p-th moment counts stopped paths as zero.
pub fn moment_exponent<S: StochasticSystem + ?Sized>(
    sys: &S,
    x: &Vector,
    p: f64,
    times: &[f64],
    opts: &MomentOptions,
    cfg: &FlowConfig,
    sampling: &Sampling,
) -> Result<MomentExponentEstimate> {
    if times.len() < 3 {
        return Err(Error::invalid("moment exponent needs a time grid of at least 3 points"));
    }
    if times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::invalid("time grid must be strictly increasing"));
    }
    let window = window_indices(times, opts.window);
    if window.len() < 2 {
        return Err(Error::invalid("fit window holds fewer than 2 grid points"));
    }
    let c = horizon(cfg, *times.last().unwrap())?;
    let steps: Vec<u64> = times.iter().map(|&t| horizon(cfg, t).and_then(|_| c.steps_to(t))).collect::<Result<_>>()?;
    let (basis, scale) = match &opts.target {
        MomentTarget::OperatorNorm => (sys.tangent_basis(x), 1.0),
        MomentTarget::Direction(v) => {
            let n = sys.norm(x, v);
            if n == 0.0 {
                return Err(Error::ZeroVector);
            }
            (vec![v.clone()], 1.0 / n)
        }
    };
    // per path: log|TF| at each grid time, None once stopped
    let per_path: Vec<Vec<Option<f64>>> = sampling.collect(|i| {
        let mut d = driver(sys, &c, sampling.seed, i);
        let mut out = vec![None; steps.len()];
        let mut j = 0;
        run_path(sys, x, &basis, &c, &mut d, |s| {
            while j < steps.len() && steps[j] == s.k + 1 {
                if s.stop.is_none() {
                    let nrm = match &opts.target {
                        MomentTarget::OperatorNorm => jacobian_norm(sys, s.x, s.vs),
                        MomentTarget::Direction(_) => sys.norm(s.x, &s.vs[0]) * scale,
                    };
                    out[j] = Some(nrm.ln());
                }
                j += 1;
            }
        })?;
        Ok(out)
    })?;
    let n = sampling.n_paths as f64;
    let (mut sm, mut ln, mut sm_se, mut ln_se, mut surv) = (vec![], vec![], vec![], vec![], vec![]);
    for j in 0..times.len() {
        let pw: Vec<f64> = per_path.iter().map(|r| r[j].map_or(0.0, |l| (p * l).exp())).collect();
        let w = summarize(&pw);
        sm.push(w.mean().ln());
        sm_se.push(w.stderr() / w.mean());
        let logs: Vec<f64> = per_path.iter().filter_map(|r| r[j]).collect();
        surv.push(logs.len() as u64);
        if logs.len() < 2 {
            ln.push(f64::NEG_INFINITY);
            ln_se.push(f64::INFINITY);
            continue;
        }
        let l = summarize(&logs);
        let (ns, var) = (logs.len() as f64, l.variance());
        let q = ns / n;
        ln.push(p * l.mean() + 0.5 * p * p * var + q.ln());
        let se2 = p * p * var / ns + p.powi(4) * var * var / (2.0 * (ns - 1.0)) + (1.0 - q) / (n * q);
        ln_se.push(se2.sqrt());
    }
    let (log_moments, log_moment_stderrs) = match opts.method {
        MomentMethod::SampleMean => (sm.clone(), sm_se),
        MomentMethod::LogNormal => (ln.clone(), ln_se),
    };
    let xs: Vec<f64> = window.iter().map(|&i| times[i]).collect();
    let ys: Vec<f64> = window.iter().map(|&i| log_moments[i]).collect();
    if ys.iter().any(|y| !y.is_finite()) {
        return Err(Error::invalid("log-moment is not finite in the fit window (all paths stopped?)"));
    }
    let fit = ols(&xs, &ys).ok_or_else(|| Error::invalid("degenerate fit window"))?;
    Ok(MomentExponentEstimate {
        p,
        times: times.to_vec(),
        method: opts.method,
        log_moments,
        log_moment_stderrs,
        sample_mean_log_moments: sm,
        lognormal_log_moments: ln,
        survivors: surv,
        window,
        slope: fit.slope,
        intercept: fit.intercept,
        slope_stderr: fit.slope_stderr,
        slope_ci: fit.slope_ci,
        strongly_moment_stable_candidate: fit.slope_ci.1 < 0.0,
        n_paths: sampling.n_paths,
        seed: sampling.seed,
        fingerprint: c.fingerprint(&sys.id()),
    })
}
