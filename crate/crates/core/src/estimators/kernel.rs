//! `∂_x log p_t(x, y)` for the one-dimensional Ornstein–Uhlenbeck process by
//! conditioning the Bismut weight on the endpoint with exact bridges.

use super::{MonteCarloEstimate, Sampling};
use crate::error::{Error, Result};
use crate::flows::fingerprint_of;
use crate::rng::BrownianDriver;
use crate::stats::summarize;

fn transition(c: f64, gamma: f64, dt: f64) -> (f64, f64) {
    let a = (-c * dt).exp();
    let v = if c.abs() * dt < 1e-8 { gamma * gamma * dt } else { gamma * gamma * (-(-2.0 * c * dt).exp_m1()) / (2.0 * c) };
    (a, v)
}

/// Sample OU bridges `x → y` on `n_steps` equal steps, reconstruct
/// `ΔB = (Δx + c x ds)/γ` and average `(1/(γ t)) Σ e^{−c s_k} ΔB_k`.
///
/// Dividing by `γ` converts the gradient for the metric `γ^{-2}|·|²`, in
/// which the generator is half the Laplacian plus drift, to `∂_x`.
pub fn grad_log_heat_kernel_ou(
    c: f64,
    gamma: f64,
    x: f64,
    y: f64,
    t: f64,
    n_steps: u64,
    sampling: &Sampling,
) -> Result<MonteCarloEstimate> {
    if !(t > 0.0) {
        return Err(Error::invalid("kernel gradient needs t > 0"));
    }
    if gamma == 0.0 {
        return Err(Error::invalid("kernel gradient needs gamma != 0"));
    }
    if n_steps == 0 {
        return Err(Error::invalid("bridge needs at least one step"));
    }
    let ds = t / n_steps as f64;
    let (a1, v1) = transition(c, gamma, ds);
    let vals = sampling.collect(|i| {
        let mut d = BrownianDriver::new(sampling.seed, i, 1, ds);
        let mut z = [0.0];
        let mut xk = x;
        let mut acc = 0.0;
        for k in 0..n_steps {
            let s = k as f64 * ds;
            let next = if k + 1 == n_steps {
                y
            } else {
                let (a2, v2) = transition(c, gamma, t - (k + 1) as f64 * ds);
                let prec = 1.0 / v1 + a2 * a2 / v2;
                let mean = (a1 * xk / v1 + a2 * y / v2) / prec;
                d.standard_normals(k, &mut z);
                mean + z[0] / prec.sqrt()
            };
            let db = (next - xk + c * xk * ds) / gamma;
            acc += (-c * s).exp() * db;
            xk = next;
        }
        Ok(acc / (gamma * t))
    })?;
    let w = summarize(&vals);
    let params = format!("c={c} gamma={gamma} x={x} y={y} t={t} n_steps={n_steps}");
    Ok(MonteCarloEstimate {
        estimator: "grad_log_heat_kernel_ou".into(),
        manifold: format!("langevin:{c}:{gamma}:1"),
        t,
        value: w.mean(),
        stderr: w.stderr(),
        n_paths: sampling.n_paths,
        seed: sampling.seed,
        fingerprint: fingerprint_of(&params),
        params_hash: fingerprint_of(&format!("grad_log_heat_kernel_ou|{params}")),
    })
}
