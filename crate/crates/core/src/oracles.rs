//! Closed-form reference values for the catalog models.
//!
//! Scalar references are reachable by id through [`OracleCatalog`]; the
//! pathwise references (`langevin_exact`, `hyperbolic_exact`) consume an
//! explicit increment stream so they can share noise with the stepper.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_1_SQRT_2, PI};

use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::linalg::Vector;

/// `E|v_t|^p = |v_0|^p exp(p(p−n)t / (2r²))` for the derivative flow of the
/// gradient Brownian system on `S^n(r)`.
pub fn sphere_moment(n: usize, r: f64, p: f64, t: f64, v0_norm: f64) -> Result<f64> {
    if !(r > 0.0) || n == 0 {
        return Err(Error::invalid("sphere moment needs r > 0 and n >= 1"));
    }
    Ok(v0_norm.powf(p) * (p * (p - n as f64) * t / (2.0 * r * r)).exp())
}

/// Moment exponent `p(p−n)/(2r²)` on `S^n(r)`.
pub fn sphere_moment_exponent(n: usize, r: f64, p: f64) -> f64 {
    p * (p - n as f64) / (2.0 * r * r)
}

fn ou_step_coeffs(c: f64, gamma: f64, dt: f64) -> (f64, f64) {
    let a = (-c * dt).exp();
    // variance γ²(1 − e^{−2c dt})/(2c), continuous at c = 0
    let v = if c.abs() * dt < 1e-8 { gamma * gamma * dt * (1.0 - c * dt) } else { gamma * gamma * (-(-2.0 * c * dt).exp_m1()) / (2.0 * c) };
    (a, v)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LangevinPath {
    pub times: Vec<f64>,
    pub points: Vec<Vector>,
    /// Scalar Jacobian `e^{−ct}` at each time.
    pub jacobian: Vec<f64>,
}

/// Exact Ornstein–Uhlenbeck transitions driven by Brownian increments of
/// step `dt`: `x_{k+1} = e^{−c dt} x_k + sqrt(v(dt)) ΔB_k / sqrt(dt)`.
pub fn langevin_exact(c: f64, gamma: f64, x0: &Vector, increments: &[Vector], dt: f64) -> Result<LangevinPath> {
    if !(c > 0.0) {
        return Err(Error::invalid("langevin oracle needs c > 0"));
    }
    if !(dt > 0.0) {
        return Err(Error::invalid("dt must be positive"));
    }
    let (a, v) = ou_step_coeffs(c, gamma, dt);
    let s = (v / dt).sqrt();
    let mut out = LangevinPath { times: vec![0.0], points: vec![x0.clone()], jacobian: vec![1.0] };
    let mut x = x0.clone();
    for (k, db) in increments.iter().enumerate() {
        if db.len() != x0.len() {
            return Err(Error::DimensionMismatch { expected: x0.len(), got: db.len() });
        }
        x = x.scaled(a);
        x.axpy(s, db);
        let t = (k + 1) as f64 * dt;
        out.times.push(t);
        out.points.push(x.clone());
        out.jacobian.push((-c * t).exp());
    }
    Ok(out)
}

/// Ornstein–Uhlenbeck transition kernel on `R`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OuKernel {
    pub c: f64,
    pub gamma: f64,
    pub t: f64,
}

impl OuKernel {
    pub fn new(c: f64, gamma: f64, t: f64) -> Result<Self> {
        if !(t > 0.0) {
            return Err(Error::invalid("ou kernel needs t > 0"));
        }
        if gamma == 0.0 {
            return Err(Error::invalid("ou kernel needs gamma != 0"));
        }
        Ok(OuKernel { c, gamma, t })
    }

    pub fn mean(&self, x: f64) -> f64 {
        x * (-self.c * self.t).exp()
    }

    pub fn variance(&self) -> f64 {
        ou_step_coeffs(self.c, self.gamma, self.t).1
    }

    pub fn density(&self, x: f64, y: f64) -> f64 {
        let v = self.variance();
        let d = y - self.mean(x);
        (-0.5 * d * d / v).exp() / (2.0 * PI * v).sqrt()
    }

    /// `∂_x log p_t(x, y) = e^{−ct}(y − x e^{−ct}) / Var`.
    pub fn dlog_dx(&self, x: f64, y: f64) -> f64 {
        (-self.c * self.t).exp() * (y - self.mean(x)) / self.variance()
    }

    /// `P_t f(x)` by adaptive quadrature, absolute tolerance `1e-10`.
    pub fn semigroup<F: Fn(f64) -> f64>(&self, f: F, x: f64) -> f64 {
        gaussian_expectation(self.mean(x), self.variance().sqrt(), f, 1e-10)
    }
}

/// `E f(m + s Z)` for standard normal `Z`, by adaptive Simpson quadrature
/// on `[m − 12s, m + 12s]`.
pub fn gaussian_expectation<F: Fn(f64) -> f64>(m: f64, s: f64, f: F, tol: f64) -> f64 {
    if s == 0.0 {
        return f(m);
    }
    let g = |z: f64| f(m + s * z) * (-0.5 * z * z).exp() / (2.0 * PI).sqrt();
    // split so the Gaussian bulk is resolved from the start
    let edges = [-12.0, -6.0, -3.0, -1.0, 0.0, 1.0, 3.0, 6.0, 12.0];
    let mut total = 0.0;
    for w in edges.windows(2) {
        total += adaptive_simpson(&g, w[0], w[1], tol / 8.0);
    }
    total
}

/// Adaptive Simpson quadrature of `f` on `[a, b]` to absolute tolerance `tol`.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    fn rec<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        rec(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1) + rec(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
    }
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    rec(f, a, b, fa, fm, fb, whole, tol, 50)
}

/// Heat semigroup of `½Δ` on `R`: `E f(x + B_t)`.
pub fn heat_semigroup_1d<F: Fn(f64) -> f64>(f: F, x: f64, t: f64) -> f64 {
    gaussian_expectation(x, t.sqrt(), f, 1e-10)
}

/// `∂_x E f(x + B_t) = E[f(x + B_t) B_t] / t`, by quadrature.
pub fn heat_gradient_1d<F: Fn(f64) -> f64>(f: F, x: f64, t: f64) -> f64 {
    gaussian_expectation(0.0, t.sqrt(), |b| f(x + b) * b, 1e-10) / t
}

#[derive(Debug, Clone, PartialEq)]
pub struct HyperbolicPath {
    pub times: Vec<f64>,
    pub points: Vec<Vector>,
    /// `E_t = exp(B²_t − t/2)`.
    pub e: Vec<f64>,
    /// `I_t = ∫ E dB¹`, trapezoidal in the supplied increments.
    pub i: Vec<f64>,
}

impl HyperbolicPath {
    /// Coordinate Jacobian `[[1, I_t], [0, E_t]]` applied to `v`.
    pub fn jacobian_apply(&self, k: usize, v: &Vector) -> Vector {
        Vector::from([v[0] + self.i[k] * v[1], self.e[k] * v[1]])
    }

    /// `|T F_t v|_hyp / |v|_hyp` with `|u|_hyp = |u| / y`.
    pub fn norm_ratio(&self, k: usize, v: &Vector) -> f64 {
        let y0 = self.points[0][1];
        let yt = self.points[k][1];
        let w = self.jacobian_apply(k, v);
        (w.norm() / yt) / (v.norm() / y0)
    }
}

/// Brownian flow on the hyperbolic plane: `y_t = y0 E_t`,
/// `x_t = x0 + y0 ∫ E dB¹` with `E_t = exp(B²_t − t/2)`. The `y` component
/// is exact at the nodes; the stochastic integral is trapezoidal.
pub fn hyperbolic_exact(x0: f64, y0: f64, increments: &[Vector], dt: f64) -> Result<HyperbolicPath> {
    if !(y0 > 0.0) {
        return Err(Error::invalid("hyperbolic flow needs y0 > 0"));
    }
    let mut out = HyperbolicPath { times: vec![0.0], points: vec![Vector::from([x0, y0])], e: vec![1.0], i: vec![0.0] };
    let (mut b2, mut integral, mut e_prev) = (0.0, 0.0, 1.0);
    for (k, db) in increments.iter().enumerate() {
        if db.len() != 2 {
            return Err(Error::DimensionMismatch { expected: 2, got: db.len() });
        }
        let t = (k + 1) as f64 * dt;
        b2 += db[1];
        let e = (b2 - 0.5 * t).exp();
        integral += 0.5 * (e_prev + e) * db[0];
        e_prev = e;
        out.times.push(t);
        out.points.push(Vector::from([x0 + y0 * integral, y0 * e]));
        out.e.push(e);
        out.i.push(integral);
    }
    Ok(out)
}

/// First moment `E|T_x F_t|` on the flat torus `S¹(a) × S¹(b)`; closed form
/// only for `a = b = 1/√2`.
pub fn torus_first_moment(a: f64, b: f64) -> Result<f64> {
    if (a - FRAC_1_SQRT_2).abs() < 1e-12 && (b - FRAC_1_SQRT_2).abs() < 1e-12 {
        Ok(1.0)
    } else {
        Err(Error::Unsupported(format!("no closed-form first moment for torus a={a}, b={b}; only a = b = 1/sqrt(2)")))
    }
}

/// `P{sup_{s≤t} |W_s| ≥ a}` for one-dimensional Brownian motion, by the
/// method of images.
pub fn interval_exit_probability(a: f64, t: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    if a / t.sqrt() > 1.5 {
        // small time: alternating image series
        let z = a / (2.0 * t).sqrt();
        let mut p = 0.0;
        for k in 1..50 {
            let term = erfc((2 * k - 1) as f64 * z);
            p += if k % 2 == 1 { 2.0 * term } else { -2.0 * term };
            if term < 1e-300 {
                break;
            }
        }
        p.clamp(0.0, 1.0)
    } else {
        // large time: eigenfunction series for the survival probability
        let mut s = 0.0;
        for k in 0..200 {
            let m = (2 * k + 1) as f64;
            let term = (4.0 / PI) / m * (-(m * m) * PI * PI * t / (8.0 * a * a)).exp();
            s += if k % 2 == 0 { term } else { -term };
            if term < 1e-17 {
                break;
            }
        }
        (1.0 - s).clamp(0.0, 1.0)
    }
}

/// Normalised area of the cap `{x_n ≥ h}` of the unit sphere `S²`.
pub fn sphere_cap_fraction(h: f64) -> f64 {
    ((1.0 - h.clamp(-1.0, 1.0)) / 2.0).clamp(0.0, 1.0)
}

/// Named scalar oracle parameters.
pub type Params = BTreeMap<String, f64>;

pub fn params(kv: &[(&str, f64)]) -> Params {
    kv.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

type OracleFn = fn(&Params) -> Result<f64>;

fn get(p: &Params, k: &str) -> Result<f64> {
    p.get(k).copied().ok_or_else(|| Error::invalid(format!("oracle parameter `{k}` missing")))
}

/// Scalar ground truths by id.
pub struct OracleCatalog {
    entries: BTreeMap<&'static str, (&'static str, OracleFn)>,
}

impl OracleCatalog {
    pub fn standard() -> Self {
        let mut e: BTreeMap<&'static str, (&'static str, OracleFn)> = BTreeMap::new();
        e.insert("sphere-moment", ("n, r, p, t, v0", |p| {
            sphere_moment(get(p, "n")? as usize, get(p, "r")?, get(p, "p")?, get(p, "t")?, get(p, "v0")?)
        }));
        e.insert("sphere-moment-exponent", ("n, r, p", |p| {
            Ok(sphere_moment_exponent(get(p, "n")? as usize, get(p, "r")?, get(p, "p")?))
        }));
        e.insert("langevin-jacobian", ("c, t", |p| Ok((-get(p, "c")? * get(p, "t")?).exp())));
        e.insert("langevin-mean", ("c, x, t", |p| Ok(get(p, "x")? * (-get(p, "c")? * get(p, "t")?).exp())));
        e.insert("langevin-stationary-variance", ("c, gamma", |p| {
            let g = get(p, "gamma")?;
            Ok(g * g / (2.0 * get(p, "c")?))
        }));
        e.insert("ou-variance", ("c, gamma, t", |p| Ok(OuKernel::new(get(p, "c")?, get(p, "gamma")?, get(p, "t")?)?.variance())));
        e.insert("ou-density", ("c, gamma, t, x, y", |p| {
            Ok(OuKernel::new(get(p, "c")?, get(p, "gamma")?, get(p, "t")?)?.density(get(p, "x")?, get(p, "y")?))
        }));
        e.insert("ou-grad-log-kernel", ("c, gamma, t, x, y", |p| {
            Ok(OuKernel::new(get(p, "c")?, get(p, "gamma")?, get(p, "t")?)?.dlog_dx(get(p, "x")?, get(p, "y")?))
        }));
        e.insert("ou-bismut-gradient", ("c, t", |p| Ok((-get(p, "c")? * get(p, "t")?).exp())));
        e.insert("hyperbolic-first-moment", ("t", |p| Ok(get(p, "t")?.exp())));
        e.insert("hyperbolic-moment-exponent", ("", |_| Ok(1.0)));
        e.insert("torus-first-moment", ("a, b", |p| torus_first_moment(get(p, "a")?, get(p, "b")?)));
        e.insert("sphere-cap-fraction", ("h", |p| Ok(sphere_cap_fraction(get(p, "h")?))));
        e.insert("interval-exit", ("a, t", |p| Ok(interval_exit_probability(get(p, "a")?, get(p, "t")?))));
        e.insert("heat-sin-gradient", ("x, t", |p| {
            let (x, t) = (get(p, "x")?, get(p, "t")?);
            Ok(heat_gradient_1d(f64::sin, x, t))
        }));
        e.insert("heat-sin-semigroup", ("x, t", |p| Ok(heat_semigroup_1d(f64::sin, get(p, "x")?, get(p, "t")?))));
        OracleCatalog { entries: e }
    }

    pub fn ids(&self) -> Vec<&'static str> {
        self.entries.keys().copied().collect()
    }

    pub fn signature(&self, id: &str) -> Option<&'static str> {
        self.entries.get(id).map(|e| e.0)
    }

    pub fn value(&self, id: &str, p: &Params) -> Result<f64> {
        match self.entries.get(id) {
            Some((_, f)) => f(p),
            None => Err(Error::UnknownId {
                kind: "oracle",
                id: id.to_string(),
                valid: self.ids().iter().map(|s| s.to_string()).collect(),
            }),
        }
    }

    /// Shorthand for `value(id, &params(kv))`.
    pub fn eval(&self, id: &str, kv: &[(&str, f64)]) -> Result<f64> {
        self.value(id, &params(kv))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sphere_moment_values() {
        assert!((sphere_moment(2, 1.0, 2.0, 3.7, 1.5).unwrap() - 2.25).abs() < 1e-15);
        assert!((sphere_moment(2, 1.0, 1.0, 2.0, 1.0).unwrap() - (-1.0f64).exp()).abs() < 1e-15);
        assert_eq!(sphere_moment(3, 2.0, 3.0, 10.0, 2.0).unwrap(), 8.0);
    }

    #[test]
    fn langevin_deterministic_decay() {
        let inc = vec![Vector::zeros(1); 1000];
        let p = langevin_exact(1.0, 0.0, &Vector::from([2.0]), &inc, 1e-3).unwrap();
        assert!((p.points[1000][0] - 2.0 * (-1.0f64).exp()).abs() < 1e-12);
        assert!((p.jacobian[1000] - (-1.0f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn ou_kernel_identities() {
        let k = OuKernel::new(1.0, 1.0, 1.0).unwrap();
        assert_eq!(k.dlog_dx(0.7, k.mean(0.7)), 0.0);
        let want = (-1.0f64).exp() / ((1.0 - (-2.0f64).exp()) / 2.0);
        assert!((k.dlog_dx(0.0, 1.0) - want).abs() < 1e-14);
        assert!((k.semigroup(|_| 1.0, 0.3) - 1.0).abs() < 1e-10);
        assert!((k.semigroup(|y| y, 0.3) - k.mean(0.3)).abs() < 1e-10);
        assert!((k.semigroup(|y| y * y, 0.0) - k.variance()).abs() < 1e-10);
    }

    #[test]
    fn heat_kernel_quadrature_matches_closed_form() {
        // E sin(x + B_t) = e^{−t/2} sin x
        let (x, t) = (0.4, 1.0);
        assert!((heat_semigroup_1d(f64::sin, x, t) - (-0.5f64).exp() * x.sin()).abs() < 1e-10);
        assert!((heat_gradient_1d(f64::sin, x, t) - (-0.5f64).exp() * x.cos()).abs() < 1e-9);
    }

    #[test]
    fn hyperbolic_degenerate_driver() {
        let inc: Vec<Vector> = (0..1000).map(|_| Vector::from([0.01, 0.0])).collect();
        let p = hyperbolic_exact(0.0, 1.0, &inc, 1e-3).unwrap();
        assert!((p.points[1000][1] - (-0.5f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn torus_oracle_contract() {
        assert_eq!(torus_first_moment(FRAC_1_SQRT_2, FRAC_1_SQRT_2).unwrap(), 1.0);
        assert!(matches!(torus_first_moment(1.0, 0.5), Err(Error::Unsupported(_))));
    }

    #[test]
    fn interval_exit_series_agree() {
        // both series are valid everywhere; compare them near the switch
        let a = 1.0;
        for t in [0.3, 0.44, 0.6] {
            let z = a / (2.0 * t as f64).sqrt();
            let small: f64 = (1..50)
                .map(|k| {
                    let s = erfc((2 * k - 1) as f64 * z);
                    if k % 2 == 1 { 2.0 * s } else { -2.0 * s }
                })
                .sum();
            let large = interval_exit_probability(a, t);
            assert!((small - large).abs() < 1e-10, "{t}: {small} vs {large}");
        }
    }

    #[test]
    fn catalog_lookup() {
        let c = OracleCatalog::standard();
        let v = c.eval("sphere-moment", &[("n", 2.0), ("r", 1.0), ("p", 1.0), ("t", 2.0), ("v0", 1.0)]).unwrap();
        assert!((v - (-1.0f64).exp()).abs() < 1e-15);
        assert!(matches!(c.eval("nope", &[]), Err(Error::UnknownId { .. })));
        assert!(c.eval("sphere-moment", &[("n", 2.0)]).is_err());
    }
}
