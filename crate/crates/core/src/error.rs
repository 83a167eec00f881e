use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("point is off the manifold: constraint residual {residual:.3e} exceeds tolerance {tolerance:.3e}")]
    OffManifold { residual: f64, tolerance: f64 },

    #[error("vector is not tangent: normal component {normal_component:.3e}")]
    NotTangent { normal_component: f64 },

    #[error("vector is not normal: tangential component {tangential_component:.3e}")]
    NotNormal { tangential_component: f64 },

    #[error("zero tangent vector where a non-zero one is required")]
    ZeroVector,

    #[error("index {index} out of range 1..={max}")]
    IndexOutOfRange { index: usize, max: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("retraction failed: point at distance {distance:.3e} is outside the basin {basin:.3e}")]
    RetractionFailed { distance: f64, basin: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("unknown {kind} `{id}`; valid options: {}", valid.join(", "))]
    UnknownId {
        kind: &'static str,
        id: String,
        valid: Vec<String>,
    },

    #[error("{0}")]
    Unsupported(String),

    #[error("one-form has no codifferential; supply it analytically with `with_codifferential`")]
    MissingCodifferential,

    #[error("trajectory was not completed: {0}")]
    IncompleteTrajectory(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
