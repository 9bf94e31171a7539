use thiserror::Error;

/// Errors raised across the library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("quadrature did not converge: estimate {value:e} with error {error:e} after {subdivisions} subdivisions")]
    QuadratureNonconvergence {
        value: f64,
        error: f64,
        subdivisions: usize,
    },

    #[error("divergent potential: {0}")]
    DivergentPotential(String),

    #[error("decay order not controlled: s = {s} <= gamma = {gamma}")]
    UncontrolledOrder { s: f64, gamma: f64 },

    #[error("log-log decay orders cannot be raised to powers or multiplied")]
    LoglogUnsupported,

    #[error("construction hypotheses violated: {0}")]
    HypothesesViolated(String),

    #[error("invalid parameter point: {0}")]
    InvalidPoint(String),

    #[error("point lies in the existence region; no nonexistence witness")]
    NotANonexistencePoint,

    #[error("point lies outside the existence region")]
    NotInExistenceRegion,

    #[error("profiles live on different grids")]
    GridMismatch,

    #[error("profile vanishes in the annulus but a negative power was requested")]
    NonPositiveProfile,

    #[error("ratio Tu/u is unbounded: {0}")]
    UnboundedRatio(String),

    #[error("potential {value:e} at r = {radius} falls below the lower bound {bound:e}")]
    LowerBound { radius: f64, value: f64, bound: f64 },

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
