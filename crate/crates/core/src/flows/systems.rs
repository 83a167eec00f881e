//! Stratonovich systems `dx = X(x)∘dB + A(x)dt` with their linearisations.

use crate::error::{Error, Result};
use crate::geometry::{drift_at, retract_jvp_at, Frame, Manifold, ManifoldModel};
use crate::linalg::Vector;

/// Coefficients of a Stratonovich SDE on a manifold embedded in `R^m`,
/// together with what the Jacobian stepper needs.
pub trait StochasticSystem: Send + Sync {
    fn id(&self) -> String;
    fn ambient_dim(&self) -> usize;
    fn noise_dim(&self) -> usize;
    fn intrinsic_dim(&self) -> usize;

    /// `X(x) e`
    fn diffusion(&self, x: &Vector, e: &[f64]) -> Vector;
    /// Stratonovich drift `A(x)`.
    fn drift(&self, x: &Vector) -> Vector;
    /// `(D_v X)(x) e`
    fn diffusion_jvp(&self, x: &Vector, v: &Vector, e: &[f64]) -> Vector;
    /// `(D_v A)(x)`
    fn drift_jvp(&self, x: &Vector, v: &Vector) -> Vector;

    /// `X(x) db + A(x) dt`
    fn rate(&self, x: &Vector, db: &[f64], dt: f64) -> Vector {
        let mut r = self.diffusion(x, db);
        r.axpy(dt, &self.drift(x));
        r
    }

    /// `(D_v X)(x) db + (D_v A)(x) dt`
    fn tangent_rate(&self, x: &Vector, v: &Vector, db: &[f64], dt: f64) -> Vector {
        let mut r = self.diffusion_jvp(x, v, db);
        r.axpy(dt, &self.drift_jvp(x, v));
        r
    }

    /// Map an ambient point back to the state space.
    fn retract(&self, y: &Vector) -> Result<Vector>;
    /// Derivative of `retract` at `y` (whose image is `p`) applied to `w`.
    fn retract_jvp(&self, y: &Vector, p: &Vector, w: &Vector) -> Vector;
    fn project_tangent(&self, x: &Vector, v: &Vector) -> Vector;
    /// Distance-like constraint residual, zero on the state space.
    fn residual(&self, x: &Vector) -> f64;

    /// Riemannian metric in ambient coordinates.
    fn inner(&self, _x: &Vector, u: &Vector, v: &Vector) -> f64 {
        u.dot(v)
    }

    fn norm(&self, x: &Vector, v: &Vector) -> f64 {
        self.inner(x, v, v).sqrt()
    }

    /// `⟨db, Y(x) v⟩` for the right inverse `Y` of `X` used by the Bismut
    /// weight, or `None` when the system is not elliptic.
    fn bismut_pairing(&self, x: &Vector, v: &Vector, db: &[f64]) -> Option<f64>;

    /// Orthonormal (for `inner`) basis of the tangent space at `x`.
    fn tangent_basis(&self, x: &Vector) -> Vec<Vector>;

    /// Validate a starting point.
    fn check_start(&self, x: &Vector, tolerance: f64) -> Result<()> {
        if x.len() != self.ambient_dim() {
            return Err(Error::DimensionMismatch { expected: self.ambient_dim(), got: x.len() });
        }
        let r = self.residual(x);
        if !(r <= tolerance) {
            return Err(Error::OffManifold { residual: r, tolerance });
        }
        Ok(())
    }

    /// The underlying gradient model, when there is one.
    fn as_gradient(&self) -> Option<&ManifoldModel> {
        None
    }
}

fn dot_slice(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Gradient h-Brownian system: `X(x) = P(x)`, `A = P(∇h + a)`.
impl StochasticSystem for ManifoldModel {
    fn id(&self) -> String {
        let mut s = self.manifold.id();
        if !self.potential.is_none() {
            s.push('+');
            s.push_str(&self.potential.id());
        }
        s
    }

    fn ambient_dim(&self) -> usize {
        self.manifold.ambient_dim()
    }

    fn noise_dim(&self) -> usize {
        self.manifold.ambient_dim()
    }

    fn intrinsic_dim(&self) -> usize {
        self.manifold.intrinsic_dim()
    }

    fn diffusion(&self, x: &Vector, e: &[f64]) -> Vector {
        Frame::new(&self.manifold, x).project(&Vector::from_slice(e))
    }

    fn drift(&self, x: &Vector) -> Vector {
        drift_at(&Frame::new(&self.manifold, x), self)
    }

    fn diffusion_jvp(&self, x: &Vector, v: &Vector, e: &[f64]) -> Vector {
        Frame::new(&self.manifold, x).dproj(v, &Vector::from_slice(e))
    }

    fn drift_jvp(&self, x: &Vector, v: &Vector) -> Vector {
        let f = Frame::new(&self.manifold, x);
        let dn = f.dnormals(v);
        self.drift_jvp_with(&f, &dn, v)
    }

    fn rate(&self, x: &Vector, db: &[f64], dt: f64) -> Vector {
        let f = Frame::new(&self.manifold, x);
        let mut a = self.potential.gradient(x).scaled(dt);
        if let Some(e) = &self.extra_drift {
            a.axpy(dt, e);
        }
        for (ai, bi) in a.iter_mut().zip(db) {
            *ai += bi;
        }
        f.project(&a)
    }

    fn tangent_rate(&self, x: &Vector, v: &Vector, db: &[f64], dt: f64) -> Vector {
        let f = Frame::new(&self.manifold, x);
        let dn = f.dnormals(v);
        let mut r = f.dproj_with(&dn, &Vector::from_slice(db));
        r.axpy(dt, &self.drift_jvp_with(&f, &dn, v));
        r
    }

    fn retract(&self, y: &Vector) -> Result<Vector> {
        self.manifold.closest_point(y)
    }

    fn retract_jvp(&self, y: &Vector, p: &Vector, w: &Vector) -> Vector {
        retract_jvp_at(&self.manifold, p, y, w)
    }

    fn project_tangent(&self, x: &Vector, v: &Vector) -> Vector {
        Frame::new(&self.manifold, x).project(v)
    }

    fn residual(&self, x: &Vector) -> f64 {
        self.manifold.residual(x)
    }

    fn bismut_pairing(&self, _x: &Vector, v: &Vector, db: &[f64]) -> Option<f64> {
        // ⟨X(x) db, v⟩ = ⟨db, v⟩ for tangent v
        Some(dot_slice(db, v))
    }

    fn tangent_basis(&self, x: &Vector) -> Vec<Vector> {
        Frame::new(&self.manifold, x).tangent_basis()
    }

    fn as_gradient(&self) -> Option<&ManifoldModel> {
        Some(self)
    }
}

impl ManifoldModel {
    fn drift_jvp_with(&self, f: &Frame<'_>, dn: &[Vector], v: &Vector) -> Vector {
        let x = f.point();
        let mut g = self.potential.gradient(x);
        if let Some(e) = &self.extra_drift {
            g += e;
        }
        let mut r = f.dproj_with(dn, &g);
        r += &f.project(&self.potential.hessian_apply(x, v));
        r
    }
}

/// Langevin / Ornstein–Uhlenbeck `dx = γ dB − c x dt` on `R^dim`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Langevin {
    pub c: f64,
    pub gamma: f64,
    pub dim: usize,
}

impl StochasticSystem for Langevin {
    fn id(&self) -> String {
        format!("langevin:{}:{}:{}", self.c, self.gamma, self.dim)
    }
    fn ambient_dim(&self) -> usize {
        self.dim
    }
    fn noise_dim(&self) -> usize {
        self.dim
    }
    fn intrinsic_dim(&self) -> usize {
        self.dim
    }
    fn diffusion(&self, _x: &Vector, e: &[f64]) -> Vector {
        e.iter().map(|b| self.gamma * b).collect()
    }
    fn drift(&self, x: &Vector) -> Vector {
        x.scaled(-self.c)
    }
    fn diffusion_jvp(&self, _x: &Vector, _v: &Vector, _e: &[f64]) -> Vector {
        Vector::zeros(self.dim)
    }
    fn drift_jvp(&self, _x: &Vector, v: &Vector) -> Vector {
        v.scaled(-self.c)
    }
    fn retract(&self, y: &Vector) -> Result<Vector> {
        Ok(y.clone())
    }
    fn retract_jvp(&self, _y: &Vector, _p: &Vector, w: &Vector) -> Vector {
        w.clone()
    }
    fn project_tangent(&self, _x: &Vector, v: &Vector) -> Vector {
        v.clone()
    }
    fn residual(&self, _x: &Vector) -> f64 {
        0.0
    }
    fn bismut_pairing(&self, _x: &Vector, v: &Vector, db: &[f64]) -> Option<f64> {
        if self.gamma == 0.0 {
            None
        } else {
            Some(dot_slice(db, v) / self.gamma)
        }
    }
    fn tangent_basis(&self, _x: &Vector) -> Vec<Vector> {
        (0..self.dim).map(|i| Vector::basis(self.dim, i)).collect()
    }
}

/// Brownian flow on the upper half plane with the hyperbolic metric:
/// `X(x, y) = y·I`, Stratonovich drift `(0, −y/2)` (Itô drift zero).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct HyperbolicPlane;

impl StochasticSystem for HyperbolicPlane {
    fn id(&self) -> String {
        "hyperbolic".into()
    }
    fn ambient_dim(&self) -> usize {
        2
    }
    fn noise_dim(&self) -> usize {
        2
    }
    fn intrinsic_dim(&self) -> usize {
        2
    }
    fn diffusion(&self, x: &Vector, e: &[f64]) -> Vector {
        Vector::from([x[1] * e[0], x[1] * e[1]])
    }
    fn drift(&self, x: &Vector) -> Vector {
        Vector::from([0.0, -0.5 * x[1]])
    }
    fn diffusion_jvp(&self, _x: &Vector, v: &Vector, e: &[f64]) -> Vector {
        Vector::from([v[1] * e[0], v[1] * e[1]])
    }
    fn drift_jvp(&self, _x: &Vector, v: &Vector) -> Vector {
        Vector::from([0.0, -0.5 * v[1]])
    }
    fn retract(&self, y: &Vector) -> Result<Vector> {
        if y[1] > 0.0 && y.is_finite() {
            Ok(y.clone())
        } else {
            Err(Error::RetractionFailed { distance: -y[1], basin: 0.0 })
        }
    }
    fn retract_jvp(&self, _y: &Vector, _p: &Vector, w: &Vector) -> Vector {
        w.clone()
    }
    fn project_tangent(&self, _x: &Vector, v: &Vector) -> Vector {
        v.clone()
    }
    fn residual(&self, x: &Vector) -> f64 {
        if x[1] > 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    }
    fn inner(&self, x: &Vector, u: &Vector, v: &Vector) -> f64 {
        u.dot(v) / (x[1] * x[1])
    }
    fn bismut_pairing(&self, x: &Vector, v: &Vector, db: &[f64]) -> Option<f64> {
        Some(dot_slice(db, v) / x[1])
    }
    fn tangent_basis(&self, x: &Vector) -> Vec<Vector> {
        vec![Vector::from([x[1], 0.0]), Vector::from([0.0, x[1]])]
    }
}

/// Explosive SDE on the open unit disk driven by one Brownian motion:
/// Itô form `dx = (1−|x|²)^ε x dB − ½(1−|x|²)^{2ε} x dt`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Taniguchi {
    pub epsilon: f64,
}

impl Taniguchi {
    fn u(x: &Vector) -> f64 {
        (1.0 - x.norm_squared()).max(0.0)
    }

    /// Stratonovich drift factor `φ(q)` with `A = φ(|x|²) x`, and `φ'(q)`.
    fn phi(&self, q: f64) -> (f64, f64) {
        let e = self.epsilon;
        let u = 1.0 - q;
        if u <= 0.0 {
            return (0.0, 0.0);
        }
        let p = -u.powf(2.0 * e) + e * q * u.powf(2.0 * e - 1.0);
        let dp = 3.0 * e * u.powf(2.0 * e - 1.0) - e * (2.0 * e - 1.0) * q * u.powf(2.0 * e - 2.0);
        (p, dp)
    }
}

impl StochasticSystem for Taniguchi {
    fn id(&self) -> String {
        format!("taniguchi:{}", self.epsilon)
    }
    fn ambient_dim(&self) -> usize {
        2
    }
    fn noise_dim(&self) -> usize {
        1
    }
    fn intrinsic_dim(&self) -> usize {
        2
    }
    fn diffusion(&self, x: &Vector, e: &[f64]) -> Vector {
        x.scaled(Self::u(x).powf(self.epsilon) * e[0])
    }
    fn drift(&self, x: &Vector) -> Vector {
        x.scaled(self.phi(x.norm_squared()).0)
    }
    fn diffusion_jvp(&self, x: &Vector, v: &Vector, e: &[f64]) -> Vector {
        let u = Self::u(x);
        if u <= 0.0 {
            return Vector::zeros(2);
        }
        let a = u.powf(self.epsilon);
        let da = -2.0 * self.epsilon * u.powf(self.epsilon - 1.0) * x.dot(v);
        let mut r = v.scaled(a * e[0]);
        r.axpy(da * e[0], x);
        r
    }
    fn drift_jvp(&self, x: &Vector, v: &Vector) -> Vector {
        let (p, dp) = self.phi(x.norm_squared());
        let mut r = v.scaled(p);
        r.axpy(2.0 * dp * x.dot(v), x);
        r
    }
    fn retract(&self, y: &Vector) -> Result<Vector> {
        let n = y.norm();
        if n < 1.0 && y.is_finite() {
            Ok(y.clone())
        } else {
            Err(Error::RetractionFailed { distance: n - 1.0, basin: 0.0 })
        }
    }
    fn retract_jvp(&self, _y: &Vector, _p: &Vector, w: &Vector) -> Vector {
        w.clone()
    }
    fn project_tangent(&self, _x: &Vector, v: &Vector) -> Vector {
        v.clone()
    }
    fn residual(&self, x: &Vector) -> f64 {
        if x.norm() < 1.0 {
            0.0
        } else {
            f64::INFINITY
        }
    }
    fn bismut_pairing(&self, _x: &Vector, _v: &Vector, _db: &[f64]) -> Option<f64> {
        None
    }
    fn tangent_basis(&self, _x: &Vector) -> Vec<Vector> {
        vec![Vector::basis(2, 0), Vector::basis(2, 1)]
    }
}

/// Deterministic flow `dx = a dt` on `R^dim` (zero diffusion).
#[derive(Debug, Clone, PartialEq)]
pub struct ConstantDrift {
    pub a: Vector,
}

impl StochasticSystem for ConstantDrift {
    fn id(&self) -> String {
        let c: Vec<String> = self.a.iter().map(|x| x.to_string()).collect();
        format!("constant-drift:{}", c.join(","))
    }
    fn ambient_dim(&self) -> usize {
        self.a.len()
    }
    fn noise_dim(&self) -> usize {
        self.a.len()
    }
    fn intrinsic_dim(&self) -> usize {
        self.a.len()
    }
    fn diffusion(&self, _x: &Vector, _e: &[f64]) -> Vector {
        Vector::zeros(self.a.len())
    }
    fn drift(&self, _x: &Vector) -> Vector {
        self.a.clone()
    }
    fn diffusion_jvp(&self, _x: &Vector, _v: &Vector, _e: &[f64]) -> Vector {
        Vector::zeros(self.a.len())
    }
    fn drift_jvp(&self, _x: &Vector, _v: &Vector) -> Vector {
        Vector::zeros(self.a.len())
    }
    fn retract(&self, y: &Vector) -> Result<Vector> {
        Ok(y.clone())
    }
    fn retract_jvp(&self, _y: &Vector, _p: &Vector, w: &Vector) -> Vector {
        w.clone()
    }
    fn project_tangent(&self, _x: &Vector, v: &Vector) -> Vector {
        v.clone()
    }
    fn residual(&self, _x: &Vector) -> f64 {
        0.0
    }
    fn bismut_pairing(&self, _x: &Vector, _v: &Vector, _db: &[f64]) -> Option<f64> {
        None
    }
    fn tangent_basis(&self, _x: &Vector) -> Vec<Vector> {
        let n = self.a.len();
        (0..n).map(|i| Vector::basis(n, i)).collect()
    }
}

/// Every system addressable from the catalog.
#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    Gradient(ManifoldModel),
    Langevin(Langevin),
    Hyperbolic(HyperbolicPlane),
    Taniguchi(Taniguchi),
    ConstantDrift(ConstantDrift),
}

pub const MODEL_IDS: [&str; 4] = ["langevin:c:gamma:n", "hyperbolic", "taniguchi:epsilon", "constant-drift:a1,a2,.."];

impl Model {
    /// Parse a system id. Manifold ids give gradient systems with the given
    /// drift potential id; the other systems ignore `drift` unless it is not
    /// `none`, which is an error.
    pub fn from_ids(id: &str, drift: &str) -> Result<Self> {
        let id = id.trim();
        let parts: Vec<&str> = id.split(':').collect();
        let num = |k: usize, name: &str, form: &str| -> Result<f64> {
            let s = parts
                .get(k)
                .ok_or_else(|| Error::invalid(format!("model `{id}` is missing field `{name}` (expected {form})")))?;
            s.parse::<f64>()
                .map_err(|_| Error::invalid(format!("model `{id}`: field `{name}` = `{s}` is not a number")))
        };
        let no_drift = || -> Result<()> {
            if drift.trim() != "none" && !drift.trim().is_empty() {
                Err(Error::invalid(format!("model `{id}` has a built-in drift; drift `{drift}` is not applicable")))
            } else {
                Ok(())
            }
        };
        let m = match parts[0] {
            "langevin" => {
                no_drift()?;
                let c = num(1, "c", "langevin:c:gamma:n")?;
                let gamma = num(2, "gamma", "langevin:c:gamma:n")?;
                let n = num(3, "n", "langevin:c:gamma:n")?;
                if n < 1.0 || n.fract() != 0.0 {
                    return Err(Error::invalid(format!("model `{id}`: `n` must be a positive integer")));
                }
                Model::Langevin(Langevin { c, gamma, dim: n as usize })
            }
            "hyperbolic" => {
                no_drift()?;
                Model::Hyperbolic(HyperbolicPlane)
            }
            "taniguchi" => {
                no_drift()?;
                let e = num(1, "epsilon", "taniguchi:epsilon")?;
                if !(e > 0.0) {
                    return Err(Error::invalid("taniguchi exponent must be positive"));
                }
                Model::Taniguchi(Taniguchi { epsilon: e })
            }
            "constant-drift" => {
                no_drift()?;
                let s = parts
                    .get(1)
                    .ok_or_else(|| Error::invalid(format!("model `{id}` is missing field `a` (expected constant-drift:a1,a2,..)")))?;
                let a: std::result::Result<Vec<f64>, _> = s.split(',').map(|c| c.trim().parse::<f64>()).collect();
                let a = a.map_err(|_| Error::invalid(format!("model `{id}`: cannot parse `{s}`")))?;
                Model::ConstantDrift(ConstantDrift { a: Vector::from(a) })
            }
            _ => match ManifoldModel::from_ids(id, drift) {
                Ok(m) => Model::Gradient(m),
                Err(Error::UnknownId { kind: "manifold", id, mut valid }) => {
                    valid.extend(MODEL_IDS.iter().map(|s| s.to_string()));
                    return Err(Error::UnknownId { kind: "model", id, valid });
                }
                Err(e) => return Err(e),
            },
        };
        Ok(m)
    }

    pub fn system(&self) -> &dyn StochasticSystem {
        match self {
            Model::Gradient(m) => m,
            Model::Langevin(m) => m,
            Model::Hyperbolic(m) => m,
            Model::Taniguchi(m) => m,
            Model::ConstantDrift(m) => m,
        }
    }

    pub fn manifold(&self) -> Option<&Manifold> {
        match self {
            Model::Gradient(m) => Some(&m.manifold),
            _ => None,
        }
    }
}
