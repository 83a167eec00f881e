//! Surfaces of revolution `(c1(s) cos θ, c1(s) sin θ, c2(s))`.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::linalg::Vector;

type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A scalar profile function with its first two derivatives.
#[derive(Clone)]
pub struct ProfileFn {
    pub f: ScalarFn,
    pub df: ScalarFn,
    pub ddf: ScalarFn,
}

impl ProfileFn {
    pub fn new(
        f: impl Fn(f64) -> f64 + Send + Sync + 'static,
        df: impl Fn(f64) -> f64 + Send + Sync + 'static,
        ddf: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        ProfileFn { f: Arc::new(f), df: Arc::new(df), ddf: Arc::new(ddf) }
    }
}

/// First and second fundamental forms in the `(θ, s)` frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FundamentalForms {
    pub e_big: f64,
    pub f_big: f64,
    pub g_big: f64,
    pub e: f64,
    pub f: f64,
    pub g: f64,
}

#[derive(Clone)]
pub struct SurfaceOfRevolutionParams {
    pub c1: ProfileFn,
    pub c2: ProfileFn,
    /// Open parameter interval of `s`.
    pub s_range: (f64, f64),
}

impl fmt::Debug for SurfaceOfRevolutionParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SurfaceOfRevolutionParams").field("s_range", &self.s_range).finish()
    }
}

impl SurfaceOfRevolutionParams {
    pub fn new(c1: ProfileFn, c2: ProfileFn, s_range: (f64, f64)) -> Result<Self> {
        let p = SurfaceOfRevolutionParams { c1, c2, s_range };
        let (lo, hi) = s_range;
        if !(lo < hi) {
            return Err(Error::invalid("empty parameter range"));
        }
        // spot-check regularity on a grid of the (possibly unbounded) range
        let a = if lo.is_finite() { lo } else { -50.0 };
        let b = if hi.is_finite() { hi } else { 50.0 };
        for k in 1..200 {
            let s = a + (b - a) * k as f64 / 200.0;
            if (p.c1.f)(s) <= 0.0 {
                return Err(Error::invalid(format!("profile c1 is not positive at s = {s}")));
            }
        }
        Ok(p)
    }

    fn speed(&self, s: f64) -> f64 {
        (self.c1.df)(s).hypot((self.c2.df)(s))
    }

    pub fn contains(&self, s: f64) -> bool {
        s > self.s_range.0 && s < self.s_range.1
    }

    pub fn point(&self, s: f64, theta: f64) -> Vector {
        let r = (self.c1.f)(s);
        Vector::from([r * theta.cos(), r * theta.sin(), (self.c2.f)(s)])
    }

    pub fn d_theta(&self, s: f64, theta: f64) -> Vector {
        let r = (self.c1.f)(s);
        Vector::from([-r * theta.sin(), r * theta.cos(), 0.0])
    }

    pub fn d_s(&self, s: f64, theta: f64) -> Vector {
        let r = (self.c1.df)(s);
        Vector::from([r * theta.cos(), r * theta.sin(), (self.c2.df)(s)])
    }

    /// The unit normal `(c2' cos θ, c2' sin θ, −c1') / |(c1', c2')|`.
    pub fn normal(&self, s: f64, theta: f64) -> Vector {
        let l = self.speed(s);
        let c2p = (self.c2.df)(s);
        Vector::from([c2p * theta.cos() / l, c2p * theta.sin() / l, -(self.c1.df)(s) / l])
    }

    pub fn forms(&self, s: f64) -> FundamentalForms {
        let (c1, c1p, c1pp) = ((self.c1.f)(s), (self.c1.df)(s), (self.c1.ddf)(s));
        let (c2p, c2pp) = ((self.c2.df)(s), (self.c2.ddf)(s));
        let l = c1p.hypot(c2p);
        FundamentalForms {
            e_big: c1 * c1,
            f_big: 0.0,
            g_big: l * l,
            e: -c1 * c2p / l,
            f: 0.0,
            g: (c1pp * c2p - c1p * c2pp) / l,
        }
    }

    /// Principal curvatures `(K1, K2)` on the θ and s directions, for the
    /// shape operator `−dμ` of the normal above.
    pub fn principal_curvatures(&self, s: f64) -> (f64, f64) {
        let ff = self.forms(s);
        (ff.e / ff.e_big, ff.g / ff.g_big)
    }

    pub fn gauss_curvature(&self, s: f64) -> f64 {
        let (k1, k2) = self.principal_curvatures(s);
        k1 * k2
    }
}

/// Profiles `ρ = c1(z)` of the `surface-of-revolution:<id>` catalog entries.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Profile {
    /// `ρ = cosh z`, a minimal surface.
    Catenoid,
    /// `ρ = mean + amplitude · sin z`.
    Wave { mean: f64, amplitude: f64 },
}

impl Profile {
    pub fn id(&self) -> String {
        match self {
            Profile::Catenoid => "catenoid".into(),
            Profile::Wave { mean, amplitude } => format!("wave:{mean}:{amplitude}"),
        }
    }

    /// `(c1, c1', c1'')` at `z`.
    pub fn eval(&self, z: f64) -> (f64, f64, f64) {
        match *self {
            Profile::Catenoid => (z.cosh(), z.sinh(), z.cosh()),
            Profile::Wave { mean, amplitude } => {
                let (s, c) = z.sin_cos();
                (mean + amplitude * s, amplitude * c, -amplitude * s)
            }
        }
    }

    pub fn params(&self) -> SurfaceOfRevolutionParams {
        let me = *self;
        let c1 = ProfileFn::new(move |z| me.eval(z).0, move |z| me.eval(z).1, move |z| me.eval(z).2);
        let c2 = ProfileFn::new(|z| z, |_| 1.0, |_| 0.0);
        SurfaceOfRevolutionParams { c1, c2, s_range: (f64::NEG_INFINITY, f64::INFINITY) }
    }
}
