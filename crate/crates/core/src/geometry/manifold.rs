use std::f64::consts::PI;

use smallvec::SmallVec;

use super::revolution::{Profile, ProfileFn, SurfaceOfRevolutionParams};
use crate::error::{Error, Result};
use crate::linalg::Vector;

/// Catalog of embedded manifolds, each given by implicit constraints
/// `g_j(x) = 0` with analytic gradients and Hessians.
#[derive(Debug, Clone, PartialEq)]
pub enum Manifold {
    /// `R^dim` with no constraint.
    Euclidean { dim: usize },
    /// `S^dim(radius) ⊂ R^{dim+1}`.
    Sphere { dim: usize, radius: f64 },
    /// Torus of revolution in `R³`: centre-line radius `a`, tube radius `b`.
    Torus { a: f64, b: f64 },
    /// Flat torus `S¹(a) × S¹(b) ⊂ R⁴`.
    FlatTorus { a: f64, b: f64 },
    /// `S¹(radius) × R ⊂ R³`.
    Cylinder { radius: f64 },
    /// Upper sheet of `z² − x² − y² = 1`.
    Hyperboloid,
    /// `R² ∖ {0}`: flat `R²` whose excluded ball of radius `hole` is an
    /// exit set, not part of the geometry.
    PuncturedPlane { hole: f64 },
    /// Surface `ρ = c1(z)` in cylindrical coordinates.
    Revolution(Profile),
}

pub const MANIFOLD_IDS: [&str; 8] = [
    "euclidean:n",
    "sphere:n:r",
    "torus:a:b",
    "flat-torus:a:b",
    "cylinder",
    "hyperboloid",
    "punctured-plane",
    "surface-of-revolution:<catenoid|wave>",
];

fn field(id: &str, parts: &[&str], k: usize, name: &str, form: &str) -> Result<f64> {
    match parts.get(k) {
        None => Err(Error::invalid(format!(
            "manifold `{id}` is missing field `{name}` (expected {form})"
        ))),
        Some(s) => s
            .parse::<f64>()
            .map_err(|_| Error::invalid(format!("manifold `{id}`: field `{name}` = `{s}` is not a number"))),
    }
}

fn positive(id: &str, name: &str, v: f64) -> Result<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(Error::invalid(format!("manifold `{id}`: `{name}` must be positive, got {v}")))
    }
}

impl Manifold {
    pub fn from_id(id: &str) -> Result<Self> {
        let id = id.trim();
        let parts: Vec<&str> = id.split(':').collect();
        let too_many = |n: usize| -> Result<()> {
            if parts.len() > n {
                Err(Error::invalid(format!("manifold `{id}` has {} fields, expected at most {}", parts.len() - 1, n - 1)))
            } else {
                Ok(())
            }
        };
        let m = match parts[0] {
            "euclidean" => {
                too_many(2)?;
                let n = field(id, &parts, 1, "n", "euclidean:n")?;
                if n < 1.0 || n.fract() != 0.0 {
                    return Err(Error::invalid(format!("manifold `{id}`: `n` must be a positive integer")));
                }
                Manifold::Euclidean { dim: n as usize }
            }
            "sphere" => {
                too_many(3)?;
                let n = field(id, &parts, 1, "n", "sphere:n:r")?;
                if n < 1.0 || n.fract() != 0.0 {
                    return Err(Error::invalid(format!("manifold `{id}`: `n` must be a positive integer")));
                }
                let r = positive(id, "r", field(id, &parts, 2, "r", "sphere:n:r")?)?;
                Manifold::Sphere { dim: n as usize, radius: r }
            }
            "torus" => {
                too_many(3)?;
                let a = positive(id, "a", field(id, &parts, 1, "a", "torus:a:b")?)?;
                let b = positive(id, "b", field(id, &parts, 2, "b", "torus:a:b")?)?;
                if b > a {
                    return Err(Error::invalid(format!("manifold `{id}`: tube radius b exceeds a (self-intersecting)")));
                }
                Manifold::Torus { a, b }
            }
            "flat-torus" => {
                too_many(3)?;
                let a = positive(id, "a", field(id, &parts, 1, "a", "flat-torus:a:b")?)?;
                let b = positive(id, "b", field(id, &parts, 2, "b", "flat-torus:a:b")?)?;
                Manifold::FlatTorus { a, b }
            }
            "cylinder" => {
                too_many(2)?;
                let r = if parts.len() > 1 { positive(id, "r", field(id, &parts, 1, "r", "cylinder:r")?)? } else { 1.0 };
                Manifold::Cylinder { radius: r }
            }
            "hyperboloid" => {
                too_many(1)?;
                Manifold::Hyperboloid
            }
            "punctured-plane" => {
                too_many(2)?;
                let d = if parts.len() > 1 {
                    positive(id, "delta", field(id, &parts, 1, "delta", "punctured-plane:delta")?)?
                } else {
                    1e-3
                };
                Manifold::PuncturedPlane { hole: d }
            }
            "surface-of-revolution" => match parts.get(1).copied() {
                Some("catenoid") => {
                    too_many(2)?;
                    Manifold::Revolution(Profile::Catenoid)
                }
                Some("wave") => {
                    too_many(4)?;
                    let (mean, amplitude) = if parts.len() > 2 {
                        (
                            field(id, &parts, 2, "mean", "surface-of-revolution:wave:mean:amplitude")?,
                            field(id, &parts, 3, "amplitude", "surface-of-revolution:wave:mean:amplitude")?,
                        )
                    } else {
                        (2.0, 0.5)
                    };
                    if amplitude.abs() >= mean {
                        return Err(Error::invalid(format!("manifold `{id}`: profile must stay positive")));
                    }
                    Manifold::Revolution(Profile::Wave { mean, amplitude })
                }
                other => {
                    return Err(Error::UnknownId {
                        kind: "surface-of-revolution profile",
                        id: other.unwrap_or("").to_string(),
                        valid: vec!["catenoid".into(), "wave".into()],
                    })
                }
            },
            _ => {
                return Err(Error::UnknownId {
                    kind: "manifold",
                    id: id.to_string(),
                    valid: MANIFOLD_IDS.iter().map(|s| s.to_string()).collect(),
                })
            }
        };
        Ok(m)
    }

    pub fn id(&self) -> String {
        match self {
            Manifold::Euclidean { dim } => format!("euclidean:{dim}"),
            Manifold::Sphere { dim, radius } => format!("sphere:{dim}:{radius}"),
            Manifold::Torus { a, b } => format!("torus:{a}:{b}"),
            Manifold::FlatTorus { a, b } => format!("flat-torus:{a}:{b}"),
            Manifold::Cylinder { radius } => {
                if *radius == 1.0 {
                    "cylinder".into()
                } else {
                    format!("cylinder:{radius}")
                }
            }
            Manifold::Hyperboloid => "hyperboloid".into(),
            Manifold::PuncturedPlane { hole } => format!("punctured-plane:{hole}"),
            Manifold::Revolution(p) => format!("surface-of-revolution:{}", p.id()),
        }
    }

    pub fn ambient_dim(&self) -> usize {
        match self {
            Manifold::Euclidean { dim } => *dim,
            Manifold::Sphere { dim, .. } => dim + 1,
            Manifold::FlatTorus { .. } => 4,
            Manifold::PuncturedPlane { .. } => 2,
            _ => 3,
        }
    }

    pub fn codim(&self) -> usize {
        match self {
            Manifold::Euclidean { .. } | Manifold::PuncturedPlane { .. } => 0,
            Manifold::FlatTorus { .. } => 2,
            _ => 1,
        }
    }

    pub fn intrinsic_dim(&self) -> usize {
        self.ambient_dim() - self.codim()
    }

    pub fn is_compact(&self) -> bool {
        matches!(self, Manifold::Sphere { .. } | Manifold::Torus { .. } | Manifold::FlatTorus { .. })
    }

    /// Constraint values `g_j(x)`.
    pub fn constraint(&self, x: &Vector) -> Vector {
        (0..self.codim()).map(|j| self.g(j, x)).collect()
    }

    fn g(&self, j: usize, x: &Vector) -> f64 {
        match *self {
            Manifold::Euclidean { .. } | Manifold::PuncturedPlane { .. } => 0.0,
            Manifold::Sphere { radius, .. } => 0.5 * (x.norm_squared() - radius * radius),
            Manifold::Torus { a, b } => {
                let rho = x[0].hypot(x[1]);
                0.5 * ((rho - a).powi(2) + x[2] * x[2] - b * b)
            }
            Manifold::FlatTorus { a, b } => {
                if j == 0 {
                    0.5 * (x[0] * x[0] + x[1] * x[1] - a * a)
                } else {
                    0.5 * (x[2] * x[2] + x[3] * x[3] - b * b)
                }
            }
            Manifold::Cylinder { radius } => 0.5 * (x[0] * x[0] + x[1] * x[1] - radius * radius),
            Manifold::Hyperboloid => 0.5 * (x[2] * x[2] - x[0] * x[0] - x[1] * x[1] - 1.0),
            Manifold::Revolution(p) => {
                let c = p.eval(x[2]).0;
                0.5 * (x[0] * x[0] + x[1] * x[1] - c * c)
            }
        }
    }

    pub(crate) fn grad(&self, j: usize, x: &Vector) -> Vector {
        match *self {
            Manifold::Sphere { .. } => x.clone(),
            Manifold::Torus { a, .. } => {
                let rho = x[0].hypot(x[1]);
                let k = (rho - a) / rho;
                Vector::from([k * x[0], k * x[1], x[2]])
            }
            Manifold::FlatTorus { .. } => {
                if j == 0 {
                    Vector::from([x[0], x[1], 0.0, 0.0])
                } else {
                    Vector::from([0.0, 0.0, x[2], x[3]])
                }
            }
            Manifold::Cylinder { .. } => Vector::from([x[0], x[1], 0.0]),
            Manifold::Hyperboloid => Vector::from([-x[0], -x[1], x[2]]),
            Manifold::Revolution(p) => {
                let (c, cp, _) = p.eval(x[2]);
                Vector::from([x[0], x[1], -c * cp])
            }
            Manifold::Euclidean { .. } | Manifold::PuncturedPlane { .. } => unreachable!("no constraints"),
        }
    }

    /// Ambient Hessian of `g_j` at `x` applied to `u`.
    pub(crate) fn hess_apply(&self, j: usize, x: &Vector, u: &Vector) -> Vector {
        match *self {
            Manifold::Sphere { .. } => u.clone(),
            Manifold::Torus { a, .. } => {
                let rho = x[0].hypot(x[1]);
                let q = [x[0] / rho, x[1] / rho];
                let qu = q[0] * u[0] + q[1] * u[1];
                let k = (rho - a) / rho;
                Vector::from([
                    qu * q[0] + k * (u[0] - qu * q[0]),
                    qu * q[1] + k * (u[1] - qu * q[1]),
                    u[2],
                ])
            }
            Manifold::FlatTorus { .. } => {
                if j == 0 {
                    Vector::from([u[0], u[1], 0.0, 0.0])
                } else {
                    Vector::from([0.0, 0.0, u[2], u[3]])
                }
            }
            Manifold::Cylinder { .. } => Vector::from([u[0], u[1], 0.0]),
            Manifold::Hyperboloid => Vector::from([-u[0], -u[1], u[2]]),
            Manifold::Revolution(p) => {
                let (c, cp, cpp) = p.eval(x[2]);
                Vector::from([u[0], u[1], -(cp * cp + c * cpp) * u[2]])
            }
            Manifold::Euclidean { .. } | Manifold::PuncturedPlane { .. } => unreachable!("no constraints"),
        }
    }

    /// First-order distance estimate `max_j |g_j| / |∇g_j|`, plus an infinite
    /// value on the wrong hyperboloid sheet or a degenerate point.
    pub fn residual(&self, x: &Vector) -> f64 {
        if x.len() != self.ambient_dim() || !x.is_finite() {
            return f64::INFINITY;
        }
        if matches!(self, Manifold::Hyperboloid) && x[2] <= 0.0 {
            return f64::INFINITY;
        }
        let mut r: f64 = 0.0;
        for j in 0..self.codim() {
            let gn = self.grad(j, x).norm();
            if !(gn > 0.0) || !gn.is_finite() {
                return f64::INFINITY;
            }
            r = r.max(self.g(j, x).abs() / gn);
        }
        r
    }

    /// Largest distance from `M` at which `closest_point` is accepted.
    pub fn basin(&self) -> f64 {
        match *self {
            Manifold::Euclidean { .. } | Manifold::PuncturedPlane { .. } => f64::INFINITY,
            Manifold::Sphere { radius, .. } => radius,
            Manifold::Torus { b, .. } => 0.5 * b,
            Manifold::FlatTorus { a, b } => 0.5 * a.min(b),
            Manifold::Cylinder { radius } => 0.5 * radius,
            Manifold::Hyperboloid => 0.5,
            Manifold::Revolution(_) => 0.25,
        }
    }

    /// Closest point of `M` to `y`, or a retraction failure when `y` is
    /// farther than `basin()` or at a point where the projection is undefined.
    pub fn closest_point(&self, y: &Vector) -> Result<Vector> {
        if y.len() != self.ambient_dim() {
            return Err(Error::DimensionMismatch { expected: self.ambient_dim(), got: y.len() });
        }
        let fail = |d: f64| Error::RetractionFailed { distance: d, basin: self.basin() };
        if !y.is_finite() {
            return Err(fail(f64::INFINITY));
        }
        let p = match *self {
            Manifold::Euclidean { .. } | Manifold::PuncturedPlane { .. } => return Ok(y.clone()),
            Manifold::Sphere { radius, .. } => {
                let n = y.norm();
                if n == 0.0 {
                    return Err(fail(radius));
                }
                y.scaled(radius / n)
            }
            Manifold::Torus { a, b } => {
                let rho = y[0].hypot(y[1]);
                if rho == 0.0 {
                    return Err(fail(f64::INFINITY));
                }
                let c = Vector::from([a * y[0] / rho, a * y[1] / rho, 0.0]);
                let d = y - &c;
                let dn = d.norm();
                if dn == 0.0 {
                    return Err(fail(b));
                }
                c + d.scaled(b / dn)
            }
            Manifold::FlatTorus { a, b } => {
                let r1 = y[0].hypot(y[1]);
                let r2 = y[2].hypot(y[3]);
                if r1 == 0.0 || r2 == 0.0 {
                    return Err(fail(a.min(b)));
                }
                Vector::from([a * y[0] / r1, a * y[1] / r1, b * y[2] / r2, b * y[3] / r2])
            }
            Manifold::Cylinder { radius } => {
                let r = y[0].hypot(y[1]);
                if r == 0.0 {
                    return Err(fail(radius));
                }
                Vector::from([radius * y[0] / r, radius * y[1] / r, y[2]])
            }
            Manifold::Hyperboloid => {
                if y[2] <= 0.0 {
                    return Err(fail(f64::INFINITY));
                }
                let rho = y[0].hypot(y[1]);
                let z = y[2];
                let s = hyperboloid_foot(rho, z);
                let (cs, sn) = if rho > 0.0 { (y[0] / rho, y[1] / rho) } else { (1.0, 0.0) };
                Vector::from([s * cs, s * sn, (1.0 + s * s).sqrt()])
            }
            Manifold::Revolution(prof) => {
                let rho = y[0].hypot(y[1]);
                if rho == 0.0 {
                    return Err(fail(f64::INFINITY));
                }
                let s = revolution_foot(prof, rho, y[2]).ok_or_else(|| fail(f64::INFINITY))?;
                let c = prof.eval(s).0;
                Vector::from([c * y[0] / rho, c * y[1] / rho, s])
            }
        };
        let d = (y - &p).norm();
        if d > self.basin() {
            return Err(fail(d));
        }
        Ok(p)
    }

    /// Profile data for the two-dimensional surfaces of revolution, in the
    /// `(c1(s) cos θ, c1(s) sin θ, c2(s))` form.
    pub fn revolution_params(&self) -> Option<SurfaceOfRevolutionParams> {
        match *self {
            Manifold::Sphere { dim: 2, radius: r } => Some(SurfaceOfRevolutionParams {
                c1: ProfileFn::new(move |s| r * s.sin(), move |s| r * s.cos(), move |s| -r * s.sin()),
                c2: ProfileFn::new(move |s| -r * s.cos(), move |s| r * s.sin(), move |s| r * s.cos()),
                s_range: (0.0, PI),
            }),
            Manifold::Torus { a, b } => Some(SurfaceOfRevolutionParams {
                c1: ProfileFn::new(move |s| a + b * s.cos(), move |s| -b * s.sin(), move |s| -b * s.cos()),
                c2: ProfileFn::new(move |s| b * s.sin(), move |s| b * s.cos(), move |s| -b * s.sin()),
                s_range: (-PI, PI),
            }),
            Manifold::Cylinder { radius } => Some(SurfaceOfRevolutionParams {
                c1: ProfileFn::new(move |_| radius, |_| 0.0, |_| 0.0),
                c2: ProfileFn::new(|s| s, |_| 1.0, |_| 0.0),
                s_range: (f64::NEG_INFINITY, f64::INFINITY),
            }),
            Manifold::Hyperboloid => Some(SurfaceOfRevolutionParams {
                c1: ProfileFn::new(|s| s, |_| 1.0, |_| 0.0),
                c2: ProfileFn::new(
                    |s| (1.0 + s * s).sqrt(),
                    |s| s / (1.0 + s * s).sqrt(),
                    |s| (1.0 + s * s).powf(-1.5),
                ),
                s_range: (0.0, f64::INFINITY),
            }),
            Manifold::Revolution(p) => Some(p.params()),
            _ => None,
        }
    }

    /// `(s, θ)` of an on-manifold point of a surface of revolution.
    pub fn revolution_coords(&self, x: &Vector) -> Option<(f64, f64)> {
        let theta = x[1].atan2(x[0]);
        let rho = x[0].hypot(x[1]);
        let s = match *self {
            Manifold::Sphere { dim: 2, radius } => (-x[2] / radius).clamp(-1.0, 1.0).acos(),
            Manifold::Torus { a, .. } => x[2].atan2(rho - a),
            Manifold::Cylinder { .. } => x[2],
            Manifold::Hyperboloid => rho,
            Manifold::Revolution(_) => x[2],
            _ => return None,
        };
        Some((s, theta))
    }

    /// A point of `M` from natural coordinates: `(s, θ)` on surfaces of
    /// revolution, the two angles on the flat torus, an ambient direction on
    /// spheres, and the point itself on flat spaces.
    pub fn point_from_coords(&self, q: &[f64]) -> Result<Vector> {
        let need = match self {
            Manifold::Sphere { dim, .. } if *dim != 2 => dim + 1,
            Manifold::Euclidean { dim } => *dim,
            _ => 2,
        };
        if q.len() != need {
            return Err(Error::DimensionMismatch { expected: need, got: q.len() });
        }
        match *self {
            Manifold::Euclidean { .. } | Manifold::PuncturedPlane { .. } => Ok(Vector::from_slice(q)),
            Manifold::Sphere { dim, radius } if dim != 2 => {
                let v = Vector::from_slice(q);
                let n = v.norm();
                if n == 0.0 {
                    return Err(Error::ZeroVector);
                }
                Ok(v.scaled(radius / n))
            }
            Manifold::FlatTorus { a, b } => {
                Ok(Vector::from([a * q[0].cos(), a * q[0].sin(), b * q[1].cos(), b * q[1].sin()]))
            }
            _ => {
                let p = self.revolution_params().expect("surface of revolution");
                Ok(p.point(q[0], q[1]))
            }
        }
    }
}

/// Root of `F(s) = 2s − ρ − z s/√(1+s²)` on `[0, ρ + z + 1]` by bisection.
fn hyperboloid_foot(rho: f64, z: f64) -> f64 {
    let f = |s: f64| 2.0 * s - rho - z * s / (1.0 + s * s).sqrt();
    if rho == 0.0 && z <= 2.0 {
        return 0.0;
    }
    let (mut lo, mut hi) = (0.0, rho + z.abs() + 1.0);
    // when rho == 0 and z > 2 the axis is a focal point; F(0) = 0 there and we
    // search the positive root instead, which the basin check will reject
    if rho == 0.0 {
        lo = 1e-300;
    }
    while hi - lo > 1e-12 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Foot `s` of the closest point on the profile curve `(c1(s), s)` to `(ρ, z)`.
fn revolution_foot(p: Profile, rho: f64, z: f64) -> Option<f64> {
    let f = |s: f64| {
        let (c, cp, _) = p.eval(s);
        (c - rho) * cp + (s - z)
    };
    let df = |s: f64| {
        let (c, cp, cpp) = p.eval(s);
        cp * cp + (c - rho) * cpp + 1.0
    };
    let mut s = z;
    for _ in 0..50 {
        let d = df(s);
        if !(d > 0.0) {
            break;
        }
        let step = f(s) / d;
        s -= step;
        if !s.is_finite() {
            break;
        }
        if step.abs() <= 1e-15 * (1.0 + s.abs()) {
            return Some(s);
        }
    }
    // bisection fallback on an expanding bracket around z
    let mut w = 0.5;
    for _ in 0..60 {
        let (mut lo, mut hi) = (z - w, z + w);
        if f(lo) < 0.0 && f(hi) > 0.0 {
            while hi - lo > 1e-14 * (1.0 + z.abs()) {
                let mid = 0.5 * (lo + hi);
                if f(mid) > 0.0 {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            return Some(0.5 * (lo + hi));
        }
        w *= 2.0;
    }
    None
}

pub(crate) type Normals = SmallVec<[Vector; 2]>;
