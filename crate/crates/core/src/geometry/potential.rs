use crate::error::{Error, Result};
use crate::linalg::Vector;

/// Drift potential `h` of an h-Brownian system (generator `½Δ + ∇h`).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum Potential {
    #[default]
    None,
    /// `h = −c|x|²`
    Quadratic { c: f64 },
    /// `h = −c|x|²/2`
    Gaussian { c: f64 },
}

impl Potential {
    pub const IDS: [&'static str; 3] = ["none", "quadratic:c", "gaussian:c"];

    pub fn from_id(id: &str) -> Result<Self> {
        let parts: Vec<&str> = id.trim().split(':').collect();
        let coef = |name: &str| -> Result<f64> {
            match parts.get(1) {
                None => Err(Error::invalid(format!("drift `{id}` is missing field `c` (expected {name}:c)"))),
                Some(s) => s
                    .parse::<f64>()
                    .map_err(|_| Error::invalid(format!("drift `{id}`: cannot parse `{s}` as a number"))),
            }
        };
        let p = match parts[0] {
            "none" if parts.len() == 1 => Potential::None,
            "quadratic" if parts.len() <= 2 => Potential::Quadratic { c: coef("quadratic")? },
            "gaussian" if parts.len() <= 2 => Potential::Gaussian { c: coef("gaussian")? },
            _ => {
                return Err(Error::UnknownId {
                    kind: "drift",
                    id: id.to_string(),
                    valid: Self::IDS.iter().map(|s| s.to_string()).collect(),
                })
            }
        };
        Ok(p)
    }

    pub fn id(&self) -> String {
        match self {
            Potential::None => "none".into(),
            Potential::Quadratic { c } => format!("quadratic:{c}"),
            Potential::Gaussian { c } => format!("gaussian:{c}"),
        }
    }

    pub fn is_none(&self) -> bool {
        matches!(self, Potential::None)
    }

    /// Coefficient `k` with `h = −k|x|²/2`; every catalog entry has this form.
    fn k(&self) -> f64 {
        match *self {
            Potential::None => 0.0,
            Potential::Quadratic { c } => 2.0 * c,
            Potential::Gaussian { c } => c,
        }
    }

    pub fn value(&self, x: &Vector) -> f64 {
        -0.5 * self.k() * x.norm_squared()
    }

    /// Ambient gradient.
    pub fn gradient(&self, x: &Vector) -> Vector {
        x.scaled(-self.k())
    }

    /// Ambient Hessian applied to `u`.
    pub fn hessian_apply(&self, _x: &Vector, u: &Vector) -> Vector {
        u.scaled(-self.k())
    }
}
