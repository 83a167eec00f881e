//! Test functions by symbolic id, and 1-forms with optional codifferential.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::flows::Model;
use crate::geometry::{drift_at, Frame};
use crate::linalg::Vector;

/// Built-in ambient functions, restricted to the state space.
#[derive(Debug, Clone, PartialEq)]
pub enum TestFunction {
    /// `x_i` (zero-based internally, one-based in ids).
    Coord(usize),
    /// `sin(x_i)`
    Sin(usize),
    /// Restriction of `x_i` to a sphere: a first spherical harmonic.
    Harmonic(usize),
    Const(f64),
    /// `⟨a, x⟩`
    Linear(Vector),
}

pub const FUNCTION_IDS: [&str; 5] = ["coord:i", "sin:i", "harmonic:i", "const:c", "linear:a1,a2,.."];

impl TestFunction {
    pub fn from_id(id: &str, dim: usize) -> Result<Self> {
        let id = id.trim();
        let (head, rest) = id.split_once(':').unwrap_or((id, ""));
        let missing = |f: &str| Error::invalid(format!("function `{id}` is missing field `{f}`"));
        let index = |s: &str| -> Result<usize> {
            if s.is_empty() {
                return Err(missing("i"));
            }
            let i: usize = s.parse().map_err(|_| Error::invalid(format!("function `{id}`: `{s}` is not an index")))?;
            if i == 0 || i > dim {
                return Err(Error::IndexOutOfRange { index: i, max: dim });
            }
            Ok(i - 1)
        };
        match head {
            "coord" => Ok(TestFunction::Coord(index(rest)?)),
            "sin" => Ok(TestFunction::Sin(index(rest)?)),
            "harmonic" => Ok(TestFunction::Harmonic(index(rest)?)),
            "const" => {
                if rest.is_empty() {
                    return Err(missing("c"));
                }
                rest.parse()
                    .map(TestFunction::Const)
                    .map_err(|_| Error::invalid(format!("function `{id}`: `{rest}` is not a number")))
            }
            "linear" => {
                if rest.is_empty() {
                    return Err(missing("a"));
                }
                let a: std::result::Result<Vec<f64>, _> = rest.split(',').map(|c| c.trim().parse::<f64>()).collect();
                let a = a.map_err(|_| Error::invalid(format!("function `{id}`: cannot parse `{rest}`")))?;
                if a.len() != dim {
                    return Err(Error::DimensionMismatch { expected: dim, got: a.len() });
                }
                Ok(TestFunction::Linear(Vector::from(a)))
            }
            _ => Err(Error::UnknownId {
                kind: "function",
                id: id.to_string(),
                valid: FUNCTION_IDS.iter().map(|s| s.to_string()).collect(),
            }),
        }
    }

    pub fn id(&self) -> String {
        match self {
            TestFunction::Coord(i) => format!("coord:{}", i + 1),
            TestFunction::Sin(i) => format!("sin:{}", i + 1),
            TestFunction::Harmonic(i) => format!("harmonic:{}", i + 1),
            TestFunction::Const(c) => format!("const:{c}"),
            TestFunction::Linear(a) => {
                format!("linear:{}", a.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(","))
            }
        }
    }

    pub fn value(&self, x: &Vector) -> f64 {
        match self {
            TestFunction::Coord(i) | TestFunction::Harmonic(i) => x[*i],
            TestFunction::Sin(i) => x[*i].sin(),
            TestFunction::Const(c) => *c,
            TestFunction::Linear(a) => a.dot(x),
        }
    }

    /// Ambient gradient.
    pub fn gradient(&self, x: &Vector) -> Vector {
        let n = x.len();
        match self {
            TestFunction::Coord(i) | TestFunction::Harmonic(i) => Vector::basis(n, *i),
            TestFunction::Sin(i) => Vector::basis(n, *i).scaled(x[*i].cos()),
            TestFunction::Const(_) => Vector::zeros(n),
            TestFunction::Linear(a) => a.clone(),
        }
    }

    /// Ambient Hessian applied to `u`.
    pub fn hessian_apply(&self, x: &Vector, u: &Vector) -> Vector {
        let n = x.len();
        match self {
            TestFunction::Sin(i) => Vector::basis(n, *i).scaled(-x[*i].sin() * u[*i]),
            _ => Vector::zeros(n),
        }
    }

    /// Flat Laplacian `Σ ∂²f/∂x_i²`.
    pub fn flat_laplacian(&self, x: &Vector) -> f64 {
        match self {
            TestFunction::Sin(i) => -x[*i].sin(),
            _ => 0.0,
        }
    }

    /// Laplace–Beltrami operator of the restriction to the manifold through
    /// `frame`: `tr Hess~f + ⟨tr α, ∇~f⟩`.
    pub fn laplacian_on(&self, frame: &Frame<'_>) -> f64 {
        let x = frame.point();
        let basis = frame.tangent_basis();
        let hess: f64 = basis.iter().map(|e| self.hessian_apply(x, e).dot(e)).sum();
        hess + frame.trace_alpha(&basis).dot(&self.gradient(x))
    }
}

impl fmt::Display for TestFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.id())
    }
}

type Eval = Arc<dyn Fn(&Vector, &Vector) -> f64 + Send + Sync>;
type Codiff = Arc<dyn Fn(&Vector) -> f64 + Send + Sync>;

/// A 1-form `φ_x(v)` on the state space, with optional codifferential
/// `δ^h φ` supplied analytically.
#[derive(Clone)]
pub struct OneForm {
    pub label: String,
    evaluate: Eval,
    codifferential: Option<Codiff>,
}

impl fmt::Debug for OneForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("OneForm")
            .field("label", &self.label)
            .field("codifferential", &self.codifferential.is_some())
            .finish()
    }
}

impl OneForm {
    pub fn new<F>(label: impl Into<String>, evaluate: F) -> Self
    where
        F: Fn(&Vector, &Vector) -> f64 + Send + Sync + 'static,
    {
        OneForm { label: label.into(), evaluate: Arc::new(evaluate), codifferential: None }
    }

    pub fn with_codifferential<F>(mut self, delta: F) -> Self
    where
        F: Fn(&Vector) -> f64 + Send + Sync + 'static,
    {
        self.codifferential = Some(Arc::new(delta));
        self
    }

    pub fn zero() -> Self {
        OneForm::new("zero", |_, _| 0.0).with_codifferential(|_| 0.0)
    }

    /// `⟨a, v⟩`; on flat space with no drift its codifferential vanishes.
    pub fn constant(a: Vector) -> Self {
        OneForm::new(format!("const:{a:?}"), move |_, v| a.dot(v))
    }

    pub fn evaluate(&self, x: &Vector, v: &Vector) -> f64 {
        (self.evaluate)(x, v)
    }

    pub fn has_codifferential(&self) -> bool {
        self.codifferential.is_some()
    }

    pub fn codifferential(&self, x: &Vector) -> Result<f64> {
        match &self.codifferential {
            Some(d) => Ok(d(x)),
            None => Err(Error::MissingCodifferential),
        }
    }

    /// Spot-check linearity in the tangent argument on the given samples.
    pub fn is_linear_on(&self, samples: &[(Vector, Vector, Vector)], tol: f64) -> bool {
        samples.iter().all(|(x, u, w)| {
            let (a, b) = (0.7, -1.3);
            let lhs = self.evaluate(x, &(&u.scaled(a) + &w.scaled(b)));
            let rhs = a * self.evaluate(x, u) + b * self.evaluate(x, w);
            (lhs - rhs).abs() <= tol * (1.0 + lhs.abs().max(rhs.abs()))
        })
    }
}

/// `df` with codifferential `δ df = −2 L f`, where `L` is the generator of
/// `model`. For gradient systems this is `−Δf − 2 df(A)`.
pub fn exact_one_form(f: &TestFunction, model: &Model) -> Result<OneForm> {
    let g = f.clone();
    let base = OneForm::new(format!("d({f})"), move |x, v| g.gradient(x).dot(v));
    let f = f.clone();
    let form = match model {
        Model::Gradient(m) => {
            let m = m.clone();
            base.with_codifferential(move |x| {
                let frame = Frame::new(&m.manifold, x);
                let a = drift_at(&frame, &m);
                -f.laplacian_on(&frame) - 2.0 * f.gradient(x).dot(&a)
            })
        }
        Model::Langevin(l) => {
            let (c, g2) = (l.c, l.gamma * l.gamma);
            base.with_codifferential(move |x| -g2 * f.flat_laplacian(x) + 2.0 * c * f.gradient(x).dot(x))
        }
        Model::Hyperbolic(_) => base.with_codifferential(move |x| -x[1] * x[1] * f.flat_laplacian(x)),
        Model::ConstantDrift(d) => {
            let a = d.a.clone();
            base.with_codifferential(move |x| -2.0 * f.gradient(x).dot(&a))
        }
        Model::Taniguchi(_) => {
            return Err(Error::Unsupported("no analytic codifferential for the taniguchi system".into()))
        }
    };
    Ok(form)
}
