use thiserror::Error;

/// Errors raised by the geometric and variational routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate metric at x = {x:?}")]
    DegenerateMetric { x: Vec<f64> },

    #[error("metric is not symmetric at x = {x:?} (residual {residual:e})")]
    AsymmetricMetric { x: Vec<f64>, residual: f64 },

    #[error("two-form is not antisymmetric at x = {x:?} (residual {residual:e})")]
    NonAntisymmetricForm { x: Vec<f64>, residual: f64 },

    #[error("derivative step too small at x = {x:?}")]
    StepTooSmall { x: Vec<f64> },

    #[error("field evaluation failed at x = {x:?}: {message}")]
    Field { x: Vec<f64>, message: String },

    #[error("non-finite field value at x = {x:?}")]
    NonFinite { x: Vec<f64> },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("frame violation: {0}")]
    FrameViolation(String),

    #[error("degenerate frame")]
    DegenerateFrame,

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("stiff or singular trajectory at t = {t}")]
    StepCollapse { t: f64 },

    #[error("left chart domain at t = {t}, x = {x:?}")]
    LeftChart { t: f64, x: Vec<f64> },

    #[error("zero velocity")]
    ZeroVelocity,

    #[error("no global primitive; action undefined")]
    NoPrimitive,

    #[error("singular parametrization: zero-speed node {node}")]
    SingularParametrization { node: usize },

    #[error("not at a critical loop: eta residual {residual:e} exceeds gate {gate:e}")]
    NotCritical { residual: f64, gate: f64 },

    #[error("eigen-solver failure: {0}")]
    EigenSolver(String),

    #[error("missing Morse index on orbit record")]
    MissingIndex,

    #[error("orbit crosses charts; loop resampling needs a single chart")]
    MultiChart,

    #[error("serialization failed: {0}")]
    Serialization(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Serialization(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Serialization(e.to_string())
    }
}
