use std::f64::consts::{FRAC_1_SQRT_2, PI};

use geomflow::{Manifold, ManifoldModel, TangentVector, Vector};
use proptest::prelude::*;

const CATALOG: [&str; 10] = [
    "sphere:2:1",
    "sphere:2:2",
    "sphere:3:2",
    "torus:1:0.5",
    "flat-torus:0.7071067811865476:0.7071067811865476",
    "cylinder",
    "hyperboloid",
    "surface-of-revolution:catenoid",
    "surface-of-revolution:wave",
    "euclidean:3",
];

const SURFACES: [&str; 7] = [
    "sphere:2:1",
    "sphere:2:2",
    "torus:1:0.5",
    "cylinder",
    "hyperboloid",
    "surface-of-revolution:catenoid",
    "surface-of-revolution:wave",
];

fn v(xs: &[f64]) -> Vector {
    Vector::from_slice(xs)
}

/// An on-manifold point from two or four numbers in `[0, 1)`.
fn point(m: &Manifold, q: &[f64]) -> Vector {
    let lerp = |a: f64, lo: f64, hi: f64| lo + (hi - lo) * a;
    match m {
        Manifold::Euclidean { dim } => Vector::from_slice(&q.iter().cycle().take(*dim).map(|a| lerp(*a, -3.0, 3.0)).collect::<Vec<_>>()),
        Manifold::Sphere { dim: 2, .. } => m.point_from_coords(&[lerp(q[0], 0.05 * PI, 0.95 * PI), lerp(q[1], -PI, PI)]).unwrap(),
        Manifold::Sphere { .. } => {
            let d: Vec<f64> = q.iter().map(|a| lerp(*a, -1.0, 1.0) + 0.05).collect();
            m.point_from_coords(&d).unwrap()
        }
        Manifold::Cylinder { .. } => m.point_from_coords(&[lerp(q[0], -3.0, 3.0), lerp(q[1], -PI, PI)]).unwrap(),
        Manifold::Hyperboloid => m.point_from_coords(&[lerp(q[0], 0.0, 3.0), lerp(q[1], -PI, PI)]).unwrap(),
        Manifold::Revolution(_) => m.point_from_coords(&[lerp(q[0], -2.0, 2.0), lerp(q[1], -PI, PI)]).unwrap(),
        _ => m.point_from_coords(&[lerp(q[0], -PI, PI), lerp(q[1], -PI, PI)]).unwrap(),
    }
}

fn ambient(m: &ManifoldModel, e: &[f64]) -> Vector {
    Vector::from_slice(&e[..m.ambient_dim()])
}

fn unit4() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0f64..1.0, 4)
}

fn vec4() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-2.0f64..2.0, 4)
}

fn models() -> Vec<ManifoldModel> {
    CATALOG.iter().map(|id| ManifoldModel::from_ids(id, "none").unwrap()).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn projectors_decompose_and_are_idempotent(q in unit4(), e in vec4()) {
        for m in models() {
            let x = point(&m.manifold, &q);
            let e = ambient(&m, &e);
            let t = m.tangent_project(&x, &e).unwrap().components;
            let n = m.normal_project(&x, &e).unwrap();
            prop_assert!((&(&t + &n) - &e).max_abs() < 1e-12);
            let tt = m.tangent_project(&x, &t).unwrap().components;
            prop_assert!((&tt - &t).max_abs() < 1e-12);
            for nu in m.unit_normal_frame(&x).unwrap() {
                prop_assert!((nu.norm() - 1.0).abs() < 1e-10);
                prop_assert!(nu.dot(&t).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn gradient_system_identity(q in unit4()) {
        for m in models() {
            let x = point(&m.manifold, &q);
            let dim = m.ambient_dim();
            let mut sum = Vector::zeros(dim);
            for i in 0..dim {
                let xi = m.tangent_project(&x, &Vector::basis(dim, i)).unwrap();
                sum += &m.nabla_x(&xi, i + 1).unwrap().components;
            }
            prop_assert!(sum.max_abs() < 1e-8, "{}: {:?}", m.manifold.id(), sum);
        }
    }

    #[test]
    fn alpha_and_shape_operator_pair(q in unit4(), a in vec4(), b in vec4(), c in vec4()) {
        for m in models() {
            let x = point(&m.manifold, &q);
            let u = m.tangent_project(&x, &ambient(&m, &a)).unwrap();
            let w = m.tangent_project(&x, &ambient(&m, &b)).unwrap();
            let nrm = m.normal_project(&x, &ambient(&m, &c)).unwrap();
            let lhs = m.second_fundamental_form(&u, &w).unwrap().dot(&nrm);
            let rhs = m.shape_operator(&u, &nrm).unwrap().components.dot(&w.components);
            prop_assert!((lhs - rhs).abs() < 1e-10 * (1.0 + lhs.abs()));
            let sym = m.second_fundamental_form(&w, &u).unwrap();
            prop_assert!((&sym - &m.second_fundamental_form(&u, &w).unwrap()).max_abs() < 1e-12);
        }
    }

    #[test]
    fn gauss_matches_principal_curvatures(q in unit4(), a in vec4()) {
        for id in SURFACES {
            let m = ManifoldModel::from_ids(id, "none").unwrap();
            let x = point(&m.manifold, &q);
            let vt = m.tangent_project(&x, &ambient(&m, &a)).unwrap();
            let (s, _) = m.manifold.revolution_coords(&x).unwrap();
            let p = m.manifold.revolution_params().unwrap();
            let (k1, k2) = p.principal_curvatures(s);
            let want = k1 * k2 * vt.components.norm_squared();
            let got = m.ricci_from_gauss(&vt).unwrap();
            prop_assert!((got - want).abs() < 1e-8 * (1.0 + want.abs()), "{id}: {got} vs {want}");
        }
    }

    #[test]
    fn weingarten_is_diagonal_on_surfaces_of_revolution(q in unit4()) {
        for id in SURFACES {
            let m = ManifoldModel::from_ids(id, "none").unwrap();
            let x = point(&m.manifold, &q);
            let (s, th) = m.manifold.revolution_coords(&x).unwrap();
            let p = m.manifold.revolution_params().unwrap();
            let (k1, k2) = p.principal_curvatures(s);
            let mu = p.normal(s, th);
            let dth = TangentVector::new(x.clone(), p.d_theta(s, th));
            let ds = TangentVector::new(x.clone(), p.d_s(s, th));
            let a_th = m.shape_operator(&dth, &mu).unwrap().components;
            let a_s = m.shape_operator(&ds, &mu).unwrap().components;
            prop_assert!((&a_th - &dth.components.scaled(k1)).max_abs() < 1e-9, "{id}");
            prop_assert!((&a_s - &ds.components.scaled(k2)).max_abs() < 1e-9, "{id}");
        }
    }

    #[test]
    fn h_p_is_affine_with_alpha_slope(q in unit4(), a in vec4(), c in 0.0f64..2.0) {
        for id in CATALOG {
            let pot = format!("quadratic:{c}");
            let m = ManifoldModel::from_ids(id, &pot).unwrap();
            let x = point(&m.manifold, &q);
            let vt = m.tangent_project(&x, &ambient(&m, &a)).unwrap();
            prop_assume!(vt.components.norm() > 1e-3);
            let h1 = m.h_quadratic_form(&vt, 1.0).unwrap();
            let h2 = m.h_quadratic_form(&vt, 2.0).unwrap();
            let h5 = m.h_quadratic_form(&vt, 5.0).unwrap();
            let alpha = m.second_fundamental_form(&vt, &vt).unwrap();
            let slope = alpha.norm_squared() / vt.components.norm_squared();
            prop_assert!((h2 - h1 - slope).abs() < 1e-10 * (1.0 + h1.abs()));
            prop_assert!((h5 - h2 - 3.0 * slope).abs() < 1e-10 * (1.0 + h5.abs()));
        }
    }

    #[test]
    fn nabla_x_norms_match_alpha(q in unit4(), a in vec4()) {
        for m in models() {
            let x = point(&m.manifold, &q);
            let vt = m.tangent_project(&x, &ambient(&m, &a)).unwrap();
            let dim = m.ambient_dim();
            let sum: f64 = (1..=dim).map(|i| m.nabla_x(&vt, i).unwrap().components.norm_squared()).sum();
            let hs: f64 = m
                .tangent_basis(&x)
                .unwrap()
                .iter()
                .map(|e| m.second_fundamental_form(&vt, &TangentVector::new(x.clone(), e.clone())).unwrap().norm_squared())
                .sum();
            prop_assert!((sum - hs).abs() < 1e-10 * (1.0 + hs));
            if let Manifold::Sphere { radius, .. } = m.manifold {
                let want = vt.components.norm_squared() / (radius * radius);
                prop_assert!((sum - want).abs() < 1e-10 * (1.0 + want));
            }
        }
    }

    #[test]
    fn retraction_round_trip(q in unit4(), d in -1e-3f64..1e-3) {
        for m in models() {
            let x = point(&m.manifold, &q);
            prop_assert!((&m.retract(&x).unwrap() - &x).max_abs() < 1e-10);
            for nu in m.unit_normal_frame(&x).unwrap() {
                let mut y = x.clone();
                y.axpy(d, &nu);
                let back = m.retract(&y).unwrap();
                prop_assert!((&back - &x).norm() < 1e-8, "{}: {:?}", m.manifold.id(), back);
            }
        }
    }
}

/// Tangent extension `y ↦ P(y) v` and the curve `s ↦ retract(x + s w)`.
fn along(m: &ManifoldModel, x: &Vector, w: &Vector, s: f64) -> Vector {
    let mut y = x.clone();
    y.axpy(s, w);
    m.retract(&y).unwrap()
}

/// `(∇_w T)(v)` for a tangent-valued `T(y, u)`, by central differences of
/// `T(γ(s), P(γ(s)) v)` with `γ(s) = retract(x + s w)`.
fn covariant_fd<T>(m: &ManifoldModel, x: &Vector, w: &Vector, v: &Vector, t: T) -> Vector
where
    T: Fn(&Vector, &Vector) -> Vector,
{
    let h = 1e-5;
    let ext = |s: f64| {
        let y = along(m, x, w, s);
        let vy = m.tangent_project(&y, v).unwrap().components;
        (y, vy)
    };
    let (yp, vp) = ext(h);
    let (ym, vm) = ext(-h);
    let d_tv = (&t(&yp, &vp) - &t(&ym, &vm)).scaled(0.5 / h);
    let d_v = (&vp - &vm).scaled(0.5 / h);
    let first = m.tangent_project(x, &d_tv).unwrap().components;
    let dv_cov = m.tangent_project(x, &d_v).unwrap().components;
    &first - &t(x, &dv_cov)
}

/// The unsimplified `H_p` built from `∇A`, `∇Xⁱ` and finite differences of
/// `∇Xⁱ` for `∇²Xⁱ`.
fn general_h_p(m: &ManifoldModel, x: &Vector, v: &Vector, p: f64) -> f64 {
    let dim = m.ambient_dim();
    let nx = |y: &Vector, u: &Vector, i: usize| m.nabla_x(&TangentVector::new(y.clone(), u.clone()), i).unwrap().components;
    let h = 1e-5;
    let da = (&m.drift(&along(m, x, v, h)).unwrap().components - &m.drift(&along(m, x, v, -h)).unwrap().components)
        .scaled(0.5 / h);
    let nabla_a = m.tangent_project(x, &da).unwrap().components;
    let vv = v.norm_squared();
    let mut out = 2.0 * nabla_a.dot(v);
    for i in 1..=dim {
        let xi = m.tangent_project(x, &Vector::basis(dim, i - 1)).unwrap().components;
        let second = covariant_fd(m, x, &xi, v, |y, u| nx(y, u, i));
        let nv = nx(x, v, i);
        out += second.dot(v) + nx(x, &nv, i).dot(v) + nv.norm_squared() + (p - 2.0) * nv.dot(v).powi(2) / vv;
    }
    out
}

#[test]
fn gradient_form_of_h_p_matches_general_form() {
    for (id, pot) in [
        ("sphere:2:1", "none"),
        ("sphere:2:2", "quadratic:0.3"),
        ("torus:1:0.5", "quadratic:0.2"),
        ("hyperboloid", "quadratic:1"),
        ("cylinder", "gaussian:0.5"),
        ("surface-of-revolution:wave", "none"),
    ] {
        let m = ManifoldModel::from_ids(id, pot).unwrap();
        for q in [[0.2, 0.3, 0.1, 0.7], [0.6, 0.8, 0.4, 0.2], [0.45, 0.05, 0.9, 0.3]] {
            let x = point(&m.manifold, &q);
            let vt = m.tangent_project(&x, &v(&[0.3, -0.7, 0.5])).unwrap();
            for p in [1.0, 2.0, 3.0] {
                let a = m.h_quadratic_form(&vt, p).unwrap();
                let b = general_h_p(&m, &x, &vt.components, p);
                assert!((a - b).abs() < 1e-5 * (1.0 + a.abs()), "{id} {pot} p={p}: {a} vs {b}");
            }
        }
    }
}

#[test]
fn sphere_h_p_closed_form() {
    for (r, n) in [(1.0, 2usize), (2.0, 2), (2.0, 3)] {
        let m = ManifoldModel::from_ids(&format!("sphere:{n}:{r}"), "none").unwrap();
        let mut x = Vector::zeros(n + 1);
        x[n] = r;
        let vt = TangentVector::new(x, Vector::basis(n + 1, 0));
        for p in [0.5, 1.0, 2.0, 3.0] {
            let want = (p - n as f64) / (r * r);
            assert!((m.h_quadratic_form(&vt, p).unwrap() - want).abs() < 1e-12);
        }
    }
}

#[test]
fn cylinder_h1_displayed_form() {
    // with h = −c|x|²/2 the gradient form reduces to v₂²(v₁²/|v|² − 2c);
    // with h = −c|x|² the Hessian term doubles to v₂²(v₁²/|v|² − 4c)
    let c = 0.3;
    let theta = 0.4f64;
    let x = v(&[theta.cos(), theta.sin(), 0.7]);
    let e_th = v(&[-theta.sin(), theta.cos(), 0.0]);
    let e_s = v(&[0.0, 0.0, 1.0]);
    for (v1, v2) in [(1.0, 0.0), (0.0, 1.0), (0.6, -0.8), (2.0, 1.0)] {
        let vt = TangentVector::new(x.clone(), &e_th.scaled(v1) + &e_s.scaled(v2));
        let nn = v1 * v1 + v2 * v2;
        let g = ManifoldModel::from_ids("cylinder", &format!("gaussian:{c}")).unwrap();
        let want = v2 * v2 * (v1 * v1 / nn - 2.0 * c);
        assert!((g.h_quadratic_form(&vt, 1.0).unwrap() - want).abs() < 1e-12);
        let q = ManifoldModel::from_ids("cylinder", &format!("quadratic:{c}")).unwrap();
        let want = v2 * v2 * (v1 * v1 / nn - 4.0 * c);
        assert!((q.h_quadratic_form(&vt, 1.0).unwrap() - want).abs() < 1e-12);
    }
}

#[test]
fn cylinder_principal_curvatures_and_flat_ricci() {
    let m = ManifoldModel::from_ids("cylinder", "none").unwrap();
    let x = v(&[1.0, 0.0, 0.3]);
    let mu = v(&[1.0, 0.0, 0.0]);
    let th = TangentVector::new(x.clone(), v(&[0.0, 1.0, 0.0]));
    let s = TangentVector::new(x.clone(), v(&[0.0, 0.0, 1.0]));
    assert!((&m.shape_operator(&th, &mu).unwrap().components - &v(&[0.0, -1.0, 0.0])).max_abs() < 1e-14);
    assert!(m.shape_operator(&s, &mu).unwrap().components.max_abs() < 1e-14);
    let w = TangentVector::new(x, v(&[0.0, 0.6, 0.8]));
    assert!(m.ricci_from_gauss(&w).unwrap().abs() < 1e-14);
}

#[test]
fn hyperboloid_normal_and_curvatures() {
    let m = ManifoldModel::from_ids("hyperboloid", "none").unwrap();
    let s = 1.0f64;
    let x = m.manifold.point_from_coords(&[s, 0.0]).unwrap();
    let q = (1.0 + 2.0 * s * s).sqrt();
    let mu = v(&[s / q, 0.0, -(1.0 + s * s).sqrt() / q]);
    let e = v(&[0.3, -1.1, 0.7]);
    let n = m.normal_project(&x, &e).unwrap();
    assert!((&n - &mu.scaled(mu.dot(&e))).max_abs() < 1e-10);
    for s in [0.0, 0.5, 1.0, 2.5] {
        let x = m.manifold.point_from_coords(&[s, 0.3]).unwrap();
        let vt = m.tangent_project(&x, &v(&[0.2, 0.9, -0.4])).unwrap();
        let k1 = -1.0 / (1.0 + 2.0 * s * s).sqrt();
        let k2 = -1.0 / (1.0 + 2.0 * s * s).powf(1.5);
        let want = k1 * k2 * vt.components.norm_squared();
        assert!((m.ricci_from_gauss(&vt).unwrap() - want).abs() < 1e-10);
    }
}

#[test]
fn hyperboloid_h1_is_uniformly_negative() {
    let m = ManifoldModel::from_ids("hyperboloid", "quadratic:1").unwrap();
    for i in 0..30 {
        let s = i as f64 * 0.1;
        for j in 0..8 {
            let th = j as f64 * PI / 4.0;
            let x = m.manifold.point_from_coords(&[s, th]).unwrap();
            for k in 0..6 {
                let a = k as f64 * PI / 6.0;
                let vt = m.tangent_project(&x, &v(&[a.cos(), a.sin(), 0.5 * a.cos()])).unwrap();
                let nv = vt.components.norm_squared();
                if nv < 1e-12 {
                    continue;
                }
                let h = m.h_quadratic_form(&vt, 1.0).unwrap();
                assert!(h <= -nv, "s={s} th={th}: {h} > {}", -nv);
            }
        }
    }
}

fn torus_param(a: f64, b: f64, s: f64, th: f64) -> Vector {
    v(&[(a + b * s.cos()) * th.cos(), (a + b * s.cos()) * th.sin(), b * s.sin()])
}

#[test]
fn torus_against_parametrization_differences() {
    let (a, b) = (FRAC_1_SQRT_2, FRAC_1_SQRT_2 * 0.5);
    let m = ManifoldModel::from_ids(&format!("torus:{a}:{b}"), "none").unwrap();
    for (s, th) in [(0.0, 0.0), (0.7, -1.2), (2.5, 2.0)] {
        let x = torus_param(a, b, s, th);
        let h = 1e-4;
        let p = |ds: f64, dt: f64| torus_param(a, b, s + ds, th + dt);
        let xs = (&p(h, 0.0) - &p(-h, 0.0)).scaled(0.5 / h);
        let xt = (&p(0.0, h) - &p(0.0, -h)).scaled(0.5 / h);
        let xss = (&(&p(h, 0.0) + &p(-h, 0.0)) - &x.scaled(2.0)).scaled(1.0 / (h * h));
        let xtt = (&(&p(0.0, h) + &p(0.0, -h)) - &x.scaled(2.0)).scaled(1.0 / (h * h));
        let xst = (&(&p(h, h) - &p(h, -h)) - &(&p(-h, h) - &p(-h, -h))).scaled(0.25 / (h * h));
        // brute-force projector from an orthonormalised coordinate basis
        let e1 = xs.scaled(1.0 / xs.norm());
        let mut e2 = &xt - &e1.scaled(e1.dot(&xt));
        e2 = e2.scaled(1.0 / e2.norm());
        let e = v(&[0.4, -0.9, 1.3]);
        let brute = &e1.scaled(e1.dot(&e)) + &e2.scaled(e2.dot(&e));
        assert!((&m.tangent_project(&x, &e).unwrap().components - &brute).max_abs() < 1e-8);
        // α(x_i, x_j) is the normal part of the second derivative
        let ts = TangentVector::new(x.clone(), m.tangent_project(&x, &xs).unwrap().components);
        let tt = TangentVector::new(x.clone(), m.tangent_project(&x, &xt).unwrap().components);
        for (u, w, d2) in [(&ts, &ts, &xss), (&tt, &tt, &xtt), (&ts, &tt, &xst)] {
            let want = m.normal_project(&x, d2).unwrap();
            let got = m.second_fundamental_form(u, w).unwrap();
            assert!((&got - &want).max_abs() < 1e-6, "{got:?} vs {want:?}");
        }
    }
}

#[test]
fn sphere_examples() {
    let m = ManifoldModel::from_ids("sphere:2:1", "none").unwrap();
    let n = v(&[0.0, 0.0, 1.0]);
    assert_eq!(m.tangent_project(&n, &v(&[1.0, 0.0, 0.0])).unwrap().components, v(&[1.0, 0.0, 0.0]));
    assert_eq!(m.tangent_project(&n, &v(&[0.0, 0.0, 1.0])).unwrap().components.max_abs(), 0.0);
    assert_eq!(m.normal_project(&n, &v(&[0.0, 0.0, 2.0])).unwrap(), v(&[0.0, 0.0, 2.0]));
    let s2 = ManifoldModel::from_ids("sphere:2:2", "none").unwrap();
    let x = v(&[0.0, 0.0, 2.0]);
    let u = TangentVector::new(x.clone(), v(&[0.0, 1.0, 0.0]));
    assert!((&s2.shape_operator(&u, &v(&[0.0, 0.0, 1.0])).unwrap().components - &v(&[0.0, -0.5, 0.0])).max_abs() < 1e-14);
    let z = TangentVector::new(x, Vector::zeros(3));
    assert_eq!(s2.shape_operator(&z, &v(&[0.0, 0.0, 1.0])).unwrap().components.max_abs(), 0.0);
}
