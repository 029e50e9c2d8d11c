use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// A coordinate difference sits exactly on the cut locus (L/2), so the
    /// shortest representative is not unique.
    #[error("cut-locus ambiguity in coordinate {axis}: difference is exactly half the side length")]
    CutLocusAmbiguity { axis: usize },

    #[error("point {point:?} lies outside the domain of {what}")]
    OutsideDomain { what: String, point: Vec<f64> },

    #[error("metric not positive definite at {point:?} (min eigenvalue {min_eigenvalue:e})")]
    NotPositiveDefinite { point: Vec<f64>, min_eigenvalue: f64 },

    #[error("metric singular at {point:?} (condition number {condition:e})")]
    SingularMetric { point: Vec<f64>, condition: f64 },

    #[error("metric field declares smoothness C^{declared}, curvature needs C^2")]
    InsufficientSmoothness { declared: u32 },

    #[error("non-finite curvature at {point:?}")]
    NonFinite { point: Vec<f64> },

    #[error("covering net violation: {0}")]
    NetViolation(String),

    #[error("serialization: {0}")]
    Serialization(String),
}

impl From<serde_json::Error> for Error {
    fn from(err: serde_json::Error) -> Self {
        Error::Serialization(err.to_string())
    }
}
