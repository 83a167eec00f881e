//! Regions of ambient space used as exit sets, targets and cover pairs.

use crate::error::{Error, Result};
use crate::linalg::Vector;

#[derive(Debug, Clone, PartialEq)]
pub enum RegionSpec {
    Ball { center: Vector, radius: f64 },
    Annulus { center: Vector, inner: f64, outer: f64 },
    ComplementOfBall { center: Vector, radius: f64 },
    /// `{x : ⟨x, axis⟩ ≥ height}`; on a sphere this is a spherical cap.
    Cap { axis: Vector, height: f64 },
    Everything,
    Empty,
}

pub const REGION_IDS: [&str; 6] = [
    "ball:r[:c1,c2,..]",
    "annulus:r_in:r_out[:c1,c2,..]",
    "complement-of-ball:r[:c1,c2,..]",
    "cap:height[:a1,a2,..]",
    "all",
    "empty",
];

fn num(id: &str, s: Option<&&str>, name: &str) -> Result<f64> {
    let s = s.ok_or_else(|| Error::invalid(format!("region `{id}` is missing field `{name}`")))?;
    s.parse::<f64>()
        .map_err(|_| Error::invalid(format!("region `{id}`: field `{name}` = `{s}` is not a number")))
}

fn coords(id: &str, s: Option<&&str>, dim: usize, default: Vector) -> Result<Vector> {
    match s {
        None => Ok(default),
        Some(s) => {
            let v: std::result::Result<Vec<f64>, _> = s.split(',').map(|c| c.trim().parse::<f64>()).collect();
            let v = v.map_err(|_| Error::invalid(format!("region `{id}`: cannot parse coordinates `{s}`")))?;
            if v.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, got: v.len() });
            }
            Ok(Vector::from(v))
        }
    }
}

impl RegionSpec {
    pub fn ball(center: Vector, radius: f64) -> Self {
        RegionSpec::Ball { center, radius }
    }

    pub fn centered_ball(dim: usize, radius: f64) -> Self {
        RegionSpec::Ball { center: Vector::zeros(dim), radius }
    }

    /// Parse a region id for an ambient space of dimension `dim`. Centres
    /// default to the origin and cap axes to the last coordinate axis.
    pub fn from_id(id: &str, dim: usize) -> Result<Self> {
        let parts: Vec<&str> = id.trim().split(':').collect();
        let origin = Vector::zeros(dim);
        let r = match parts[0] {
            "ball" => RegionSpec::Ball {
                radius: num(id, parts.get(1), "r")?,
                center: coords(id, parts.get(2), dim, origin)?,
            },
            "annulus" => RegionSpec::Annulus {
                inner: num(id, parts.get(1), "r_in")?,
                outer: num(id, parts.get(2), "r_out")?,
                center: coords(id, parts.get(3), dim, origin)?,
            },
            "complement-of-ball" => RegionSpec::ComplementOfBall {
                radius: num(id, parts.get(1), "r")?,
                center: coords(id, parts.get(2), dim, origin)?,
            },
            "cap" => RegionSpec::Cap {
                height: num(id, parts.get(1), "height")?,
                axis: coords(id, parts.get(2), dim, Vector::basis(dim, dim - 1))?,
            },
            "all" => RegionSpec::Everything,
            "empty" => RegionSpec::Empty,
            _ => {
                return Err(Error::UnknownId {
                    kind: "region",
                    id: id.to_string(),
                    valid: REGION_IDS.iter().map(|s| s.to_string()).collect(),
                })
            }
        };
        r.validate()?;
        Ok(r)
    }

    fn validate(&self) -> Result<()> {
        match self {
            RegionSpec::Ball { radius, .. } | RegionSpec::ComplementOfBall { radius, .. } if !(*radius >= 0.0) => {
                Err(Error::invalid("region radius must be non-negative"))
            }
            RegionSpec::Annulus { inner, outer, .. } if !(0.0 <= *inner && inner < outer) => {
                Err(Error::invalid("annulus needs 0 <= r_in < r_out"))
            }
            _ => Ok(()),
        }
    }

    pub fn id(&self) -> String {
        let c = |v: &Vector| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
        match self {
            RegionSpec::Ball { center, radius } => format!("ball:{radius}:{}", c(center)),
            RegionSpec::Annulus { center, inner, outer } => format!("annulus:{inner}:{outer}:{}", c(center)),
            RegionSpec::ComplementOfBall { center, radius } => format!("complement-of-ball:{radius}:{}", c(center)),
            RegionSpec::Cap { axis, height } => format!("cap:{height}:{}", c(axis)),
            RegionSpec::Everything => "all".into(),
            RegionSpec::Empty => "empty".into(),
        }
    }

    pub fn contains(&self, x: &Vector) -> bool {
        match self {
            RegionSpec::Ball { center, radius } => (x - center).norm() < *radius,
            RegionSpec::Annulus { center, inner, outer } => {
                let d = (x - center).norm();
                *inner < d && d < *outer
            }
            RegionSpec::ComplementOfBall { center, radius } => (x - center).norm() > *radius,
            RegionSpec::Cap { axis, height } => x.dot(axis) >= *height,
            RegionSpec::Everything => true,
            RegionSpec::Empty => false,
        }
    }

    /// Sampled check that every sample inside `self` is inside `outer`.
    pub fn contained_in(&self, outer: &RegionSpec, samples: &[Vector]) -> bool {
        samples.iter().all(|x| !self.contains(x) || outer.contains(x))
    }
}

/// When a region stops a path.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopWhen {
    Enter,
    Leave,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExitRule {
    pub name: String,
    pub region: RegionSpec,
    pub when: StopWhen,
}

impl ExitRule {
    pub fn enter(name: impl Into<String>, region: RegionSpec) -> Self {
        ExitRule { name: name.into(), region, when: StopWhen::Enter }
    }

    pub fn leave(name: impl Into<String>, region: RegionSpec) -> Self {
        ExitRule { name: name.into(), region, when: StopWhen::Leave }
    }

    pub fn triggered(&self, x: &Vector) -> bool {
        match self.when {
            StopWhen::Enter => self.region.contains(x),
            StopWhen::Leave => !self.region.contains(x),
        }
    }
}
