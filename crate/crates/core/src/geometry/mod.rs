//! Embedded manifolds and their pointwise differential geometry.
//!
//! Points and tangent vectors are ambient coordinates. Every operation on
//! [`ManifoldModel`] validates its inputs (on-manifold base point, tangency,
//! normality) and returns an error instead of silently projecting.

mod frame;
mod manifold;
mod potential;
mod revolution;

pub use frame::Frame;
pub use manifold::{Manifold, MANIFOLD_IDS};
pub use potential::Potential;
pub use revolution::{FundamentalForms, Profile, ProfileFn, SurfaceOfRevolutionParams};

use crate::error::{Error, Result};
use crate::linalg::Vector;

/// Default tolerance for on-manifold, tangency and normality checks.
pub const DEFAULT_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct TangentVector {
    pub base_point: Vector,
    pub components: Vector,
}

impl TangentVector {
    pub fn new(base_point: Vector, components: Vector) -> Self {
        TangentVector { base_point, components }
    }

    pub fn norm(&self) -> f64 {
        self.components.norm()
    }
}

/// A manifold together with the drift data of an h-Brownian system on it.
#[derive(Debug, Clone, PartialEq)]
pub struct ManifoldModel {
    pub manifold: Manifold,
    pub potential: Potential,
    /// Constant ambient field whose tangential part is added to the drift.
    pub extra_drift: Option<Vector>,
    pub tolerance: f64,
}

impl ManifoldModel {
    pub fn new(manifold: Manifold) -> Self {
        ManifoldModel { manifold, potential: Potential::None, extra_drift: None, tolerance: DEFAULT_TOLERANCE }
    }

    pub fn from_ids(manifold: &str, drift: &str) -> Result<Self> {
        Ok(Self::new(Manifold::from_id(manifold)?).with_potential(Potential::from_id(drift)?))
    }

    pub fn with_potential(mut self, potential: Potential) -> Self {
        self.potential = potential;
        self
    }

    pub fn with_extra_drift(mut self, a: Vector) -> Result<Self> {
        self.check_dim(&a)?;
        self.extra_drift = Some(a);
        Ok(self)
    }

    pub fn with_tolerance(mut self, tol: f64) -> Self {
        self.tolerance = tol;
        self
    }

    pub fn ambient_dim(&self) -> usize {
        self.manifold.ambient_dim()
    }

    pub fn intrinsic_dim(&self) -> usize {
        self.manifold.intrinsic_dim()
    }

    /// Constraint residual vector `(g_j(x))_j`, zero on `M`.
    pub fn constraint(&self, x: &Vector) -> Vector {
        self.manifold.constraint(x)
    }

    pub fn residual(&self, x: &Vector) -> f64 {
        self.manifold.residual(x)
    }

    fn check_dim(&self, v: &Vector) -> Result<()> {
        if v.len() != self.ambient_dim() {
            return Err(Error::DimensionMismatch { expected: self.ambient_dim(), got: v.len() });
        }
        Ok(())
    }

    pub fn check_point(&self, x: &Vector) -> Result<()> {
        self.check_dim(x)?;
        let r = self.residual(x);
        if !(r <= self.tolerance) {
            return Err(Error::OffManifold { residual: r, tolerance: self.tolerance });
        }
        Ok(())
    }

    fn scale(v: &Vector) -> f64 {
        v.norm().max(1.0)
    }

    fn check_tangent<'a>(&'a self, v: &'a TangentVector) -> Result<Frame<'a>> {
        self.check_point(&v.base_point)?;
        self.check_dim(&v.components)?;
        let f = Frame::new(&self.manifold, &v.base_point);
        let nc = f.normal_part(&v.components).norm();
        if nc > self.tolerance * Self::scale(&v.components) {
            return Err(Error::NotTangent { normal_component: nc });
        }
        Ok(f)
    }

    /// Frame at an on-manifold point, after validation.
    pub fn frame<'a>(&'a self, x: &'a Vector) -> Result<Frame<'a>> {
        self.check_point(x)?;
        Ok(Frame::new(&self.manifold, x))
    }

    /// Unit normal frame at `x` (orientation: increasing constraint).
    pub fn unit_normal_frame(&self, x: &Vector) -> Result<Vec<Vector>> {
        Ok(self.frame(x)?.normals().to_vec())
    }

    pub fn tangent_project(&self, x: &Vector, e: &Vector) -> Result<TangentVector> {
        self.check_dim(e)?;
        let f = self.frame(x)?;
        Ok(TangentVector::new(x.clone(), f.project(e)))
    }

    pub fn normal_project(&self, x: &Vector, e: &Vector) -> Result<Vector> {
        self.check_dim(e)?;
        Ok(self.frame(x)?.normal_part(e))
    }

    pub fn tangent_basis(&self, x: &Vector) -> Result<Vec<Vector>> {
        Ok(self.frame(x)?.tangent_basis())
    }

    /// `A_x(v, w)` for tangent `v` and normal `w`.
    pub fn shape_operator(&self, v: &TangentVector, w: &Vector) -> Result<TangentVector> {
        let f = self.check_tangent(v)?;
        self.check_dim(w)?;
        let tc = f.project(w).norm();
        if tc > self.tolerance * Self::scale(w) {
            return Err(Error::NotNormal { tangential_component: tc });
        }
        Ok(TangentVector::new(v.base_point.clone(), f.shape(&v.components, w)))
    }

    pub fn second_fundamental_form(&self, u: &TangentVector, v: &TangentVector) -> Result<Vector> {
        let f = self.check_tangent(u)?;
        self.same_base(u, v)?;
        self.check_tangent(v)?;
        Ok(f.alpha(&u.components, &v.components))
    }

    fn same_base(&self, u: &TangentVector, v: &TangentVector) -> Result<()> {
        let d = (&u.base_point - &v.base_point).norm();
        if d > self.tolerance {
            return Err(Error::invalid(format!("tangent vectors have different base points ({d:.3e} apart)")));
        }
        Ok(())
    }

    /// `∇X^i(v) = A_x(v, Z(x) e_i)` with one-based `i`.
    pub fn nabla_x(&self, v: &TangentVector, i: usize) -> Result<TangentVector> {
        let m = self.ambient_dim();
        if i == 0 || i > m {
            return Err(Error::IndexOutOfRange { index: i, max: m });
        }
        let f = self.check_tangent(v)?;
        Ok(TangentVector::new(v.base_point.clone(), f.nabla_x(&v.components, i - 1)))
    }

    pub fn ricci_from_gauss(&self, v: &TangentVector) -> Result<f64> {
        let f = self.check_tangent(v)?;
        let basis = f.tangent_basis();
        Ok(f.ricci(&v.components, &v.components, &basis))
    }

    /// `Ric(v, ·)^#` as a tangent vector.
    pub fn ricci_vector(&self, v: &TangentVector) -> Result<TangentVector> {
        let f = self.check_tangent(v)?;
        let basis = f.tangent_basis();
        let mut out = Vector::zeros(self.ambient_dim());
        for e in &basis {
            out.axpy(f.ricci(&v.components, e, &basis), e);
        }
        Ok(TangentVector::new(v.base_point.clone(), out))
    }

    /// Riemannian `⟨Hess h(v), v⟩ = ⟨Hess~h v, v⟩ + ⟨α(v, v), ∇~h⟩`.
    pub fn hessian_potential(&self, v: &TangentVector) -> Result<f64> {
        let f = self.check_tangent(v)?;
        Ok(hess_h(&f, &self.potential, &v.components, &v.components))
    }

    /// `(Hess h)^#(v) = P Hess~h v + A(v, Z ∇~h)`.
    pub fn hessian_potential_vector(&self, v: &TangentVector) -> Result<TangentVector> {
        let f = self.check_tangent(v)?;
        let x = &v.base_point;
        let g = self.potential.gradient(x);
        let mut out = f.project(&self.potential.hessian_apply(x, &v.components));
        out += &f.shape(&v.components, &f.normal_part(&g));
        Ok(TangentVector::new(x.clone(), out))
    }

    /// `H_p(v,v) = −Ric(v,v) + 2⟨Hess h(v), v⟩ + |α(v,·)|² + (p−2)|α(v,v)|²/|v|²`.
    pub fn h_quadratic_form(&self, v: &TangentVector, p: f64) -> Result<f64> {
        let f = self.check_tangent(v)?;
        let vv = v.components.norm_squared();
        if vv == 0.0 {
            return Err(Error::ZeroVector);
        }
        let basis = f.tangent_basis();
        let u = &v.components;
        let ric = f.ricci(u, u, &basis);
        let hs = f.alpha_hs_squared(u, &basis);
        let avv = f.alpha(u, u).norm_squared();
        Ok(-ric + 2.0 * hess_h(&f, &self.potential, u, u) + hs + (p - 2.0) * avv / vv)
    }

    pub fn retract(&self, y: &Vector) -> Result<Vector> {
        self.manifold.closest_point(y)
    }

    /// Derivative of the closest-point map at `y` applied to `w`: the
    /// tangent solution of `dp = P w + A(dp, y − p)` at `p = retract(y)`.
    pub fn retract_derivative(&self, y: &Vector, w: &Vector) -> Result<TangentVector> {
        self.check_dim(w)?;
        let p = self.retract(y)?;
        let dp = retract_jvp_at(&self.manifold, &p, y, w);
        Ok(TangentVector::new(p, dp))
    }

    /// Tangent drift `P∇h + P a` of the h-Brownian system.
    pub fn drift(&self, x: &Vector) -> Result<TangentVector> {
        let f = self.frame(x)?;
        Ok(TangentVector::new(x.clone(), drift_at(&f, self)))
    }
}

pub(crate) fn hess_h(f: &Frame<'_>, h: &Potential, u: &Vector, v: &Vector) -> f64 {
    let x = f.point();
    h.hessian_apply(x, u).dot(v) + f.alpha(u, v).dot(&h.gradient(x))
}

pub(crate) fn drift_at(f: &Frame<'_>, model: &ManifoldModel) -> Vector {
    let x = f.point();
    let mut a = model.potential.gradient(x);
    if let Some(e) = &model.extra_drift {
        a += e;
    }
    f.project(&a)
}

/// Retraction derivative at foot point `p` of `y`, by fixed-point iteration
/// on `dp ↦ P w + A(dp, y − p)` (a contraction inside the basin).
pub(crate) fn retract_jvp_at(m: &Manifold, p: &Vector, y: &Vector, w: &Vector) -> Vector {
    let f = Frame::new(m, p);
    let pw = f.project(w);
    if m.codim() == 0 {
        return pw;
    }
    let n = f.normal_part(&(y - p));
    if n.max_abs() == 0.0 {
        return pw;
    }
    let mut dp = pw.clone();
    for _ in 0..100 {
        let next = &pw + &f.shape(&dp, &n);
        let delta = (&next - &dp).max_abs();
        dp = next;
        if delta <= 1e-16 * (1.0 + dp.max_abs()) {
            break;
        }
    }
    dp
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sphere(r: f64) -> ManifoldModel {
        ManifoldModel::new(Manifold::Sphere { dim: 2, radius: r })
    }

    #[test]
    fn north_pole_projections() {
        let m = sphere(1.0);
        let x = Vector::from([0.0, 0.0, 1.0]);
        let t = m.tangent_project(&x, &Vector::from([1.0, 0.0, 0.0])).unwrap();
        assert_eq!(t.components.as_slice(), &[1.0, 0.0, 0.0]);
        let t = m.tangent_project(&x, &Vector::from([0.0, 0.0, 1.0])).unwrap();
        assert_eq!(t.components.norm(), 0.0);
        let n = m.normal_project(&x, &Vector::from([0.0, 0.0, 2.0])).unwrap();
        assert_eq!(n.as_slice(), &[0.0, 0.0, 2.0]);
        let n = m.normal_project(&x, &Vector::from([1.0, 0.0, 0.0])).unwrap();
        assert_eq!(n.norm(), 0.0);
    }

    #[test]
    fn off_manifold_point_rejected() {
        let m = sphere(1.0);
        let e = m.tangent_project(&Vector::from([0.0, 0.0, 1.1]), &Vector::from([1.0, 0.0, 0.0]));
        assert!(matches!(e, Err(Error::OffManifold { .. })));
    }

    #[test]
    fn sphere_shape_operator() {
        for r in [1.0, 2.0] {
            let m = sphere(r);
            let x = Vector::from([0.0, 0.0, r]);
            let v = TangentVector::new(x.clone(), Vector::from([0.3, -0.7, 0.0]));
            let a = m.shape_operator(&v, &Vector::from([0.0, 0.0, 1.0])).unwrap();
            let expect = v.components.scaled(-1.0 / r);
            assert!((&a.components - &expect).max_abs() < 1e-14);
            let zero = TangentVector::new(x.clone(), Vector::zeros(3));
            assert_eq!(m.shape_operator(&zero, &Vector::from([0.0, 0.0, 1.0])).unwrap().norm(), 0.0);
        }
    }

    #[test]
    fn sphere_second_fundamental_form() {
        let m = sphere(1.0);
        let x = Vector::from([0.0, 0.0, 1.0]);
        let u = TangentVector::new(x.clone(), Vector::from([1.0, 0.0, 0.0]));
        let v = TangentVector::new(x.clone(), Vector::from([0.0, 1.0, 0.0]));
        assert!(m.second_fundamental_form(&u, &v).unwrap().max_abs() < 1e-15);

        let m = sphere(2.0);
        let x = Vector::from([0.0, 0.0, 2.0]);
        let u = TangentVector::new(x.clone(), Vector::from([1.0, 0.0, 0.0]));
        let a = m.second_fundamental_form(&u, &u).unwrap();
        assert!((&a - &x.scaled(-0.25)).max_abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_arguments() {
        let m = sphere(1.0);
        let x = Vector::from([0.0, 0.0, 1.0]);
        let bad = TangentVector::new(x.clone(), Vector::from([0.0, 0.0, 1.0]));
        assert!(matches!(m.ricci_from_gauss(&bad), Err(Error::NotTangent { .. })));
        let v = TangentVector::new(x.clone(), Vector::from([1.0, 0.0, 0.0]));
        let not_normal = Vector::from([1.0, 0.0, 0.0]);
        assert!(matches!(m.shape_operator(&v, &not_normal), Err(Error::NotNormal { .. })));
        assert!(matches!(m.nabla_x(&v, 0), Err(Error::IndexOutOfRange { .. })));
        assert!(matches!(m.nabla_x(&v, 4), Err(Error::IndexOutOfRange { .. })));
        let zero = TangentVector::new(x, Vector::zeros(3));
        assert!(matches!(m.h_quadratic_form(&zero, 1.0), Err(Error::ZeroVector)));
    }

    #[test]
    fn nabla_x_at_north_pole() {
        let m = sphere(1.0);
        let x = Vector::from([0.0, 0.0, 1.0]);
        let v = TangentVector::new(x, Vector::from([1.0, 0.0, 0.0]));
        let n3 = m.nabla_x(&v, 3).unwrap();
        assert!((n3.components.as_slice()[0] + 1.0).abs() < 1e-15);
        assert_eq!(m.nabla_x(&v, 1).unwrap().norm(), 0.0);
    }

    #[test]
    fn unit_sphere_ricci() {
        let m = sphere(1.0);
        let x = Vector::from([0.6, 0.0, 0.8]);
        let v = TangentVector::new(x, Vector::from([0.0, 1.0, 0.0]));
        assert!((m.ricci_from_gauss(&v).unwrap() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn sphere_retraction() {
        let m = sphere(1.0);
        let p = m.retract(&Vector::from([0.0, 0.0, 2.0])).unwrap();
        assert_eq!(p.as_slice(), &[0.0, 0.0, 1.0]);
        let p = m.retract(&Vector::from([0.0, 0.0, 3.0]));
        assert!(matches!(p, Err(Error::RetractionFailed { .. })));
        assert!(m.retract(&Vector::zeros(3)).is_err());
    }

    #[test]
    fn torus_retraction_is_identity_on_manifold() {
        let m = ManifoldModel::new(Manifold::Torus { a: 2.0, b: 0.5 });
        let x = m.manifold.point_from_coords(&[0.7, 1.9]).unwrap();
        let y = m.retract(&x).unwrap();
        assert!((&x - &y).max_abs() < 1e-15);
    }
}
