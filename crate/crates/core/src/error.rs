use thiserror::Error;

/// Errors raised by the geometry, distance and diagnostics routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("unsupported dimension {0} (expected 3..=8)")]
    UnsupportedDimension(usize),
    #[error("operation requires dimension 4, got {0}")]
    WrongDimension(usize),
    #[error("bad radii: need 0 < r_min < r_max, got r_min = {r_min}, r_max = {r_max}")]
    BadRadii { r_min: f64, r_max: f64 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("point {point:?} lies outside the evaluation domain")]
    EvalOutsideDomain { point: Vec<f64> },
    #[error("conformal factor is not positive at {point:?} (value {value})")]
    NonPositiveFactor { point: Vec<f64>, value: f64 },
    #[error("derivatives of order {order} are unavailable for {what}")]
    DerivativeUnavailable { order: usize, what: &'static str },
    #[error("finite-difference stencil leaves the domain at {point:?}")]
    StencilOutOfDomain { point: Vec<f64> },
    #[error("integration region is empty")]
    EmptyRegion,
    #[error("radius {r} outside the admissible range [{lo}, {hi}]")]
    RadiusOutOfRange { r: f64, lo: f64, hi: f64 },
    #[error("hypothesis violated: measured a = {measured_a:e} exceeds the bound {bound:e}")]
    HypothesisViolated { measured_a: f64, bound: f64 },
    #[error("chart too small: need radius {needed}, chart provides {available}")]
    ChartTooSmall { needed: f64, available: f64 },
    #[error("point {point:?} is not connected to the distance graph")]
    Disconnected { point: Vec<f64> },
    #[error("geodesic ball escapes the covered domain (reachable fraction {reachable_fraction:.4})")]
    BallEscapesDomain { reachable_fraction: f64 },
    #[error("input point is the origin")]
    OriginInput,
    #[error("point with |x| = {norm} is outside the unit ball")]
    OutOfBall { norm: f64 },
    #[error("expression error at byte {position}: {message}")]
    Expression { position: usize, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;
