//! Error type shared by all modules.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Coarse classification used by callers (e.g. the CLI exit-code mapping).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    /// The inputs violate a domain precondition (bad polynomial, cycle not
    /// positive, cycles not in the same isotopy class, …).
    Domain,
    /// A numerical procedure failed or lost accuracy (step collapse, sheet
    /// jump, double intersection, …).
    Numeric,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("polynomial has no nonzero coefficient")]
    EmptyPolynomial,
    #[error("roots {i} and {j} are closer than the simplicity tolerance (separation {sep:.3e})")]
    DegenerateRoots { i: usize, j: usize, sep: f64 },
    #[error("seed does not square to f at the start of the path (residual {residual:.3e})")]
    BadSeed { residual: f64 },
    #[error("branch step near index {index} too large; path passed too close to a branch point")]
    StepTooLarge { index: usize },
    #[error("arc endpoint {which} is not a root of f (distance {dist:.3e})")]
    ArcEndpointNotRoot { which: &'static str, dist: f64 },
    #[error("arc interior passes through a zero of f near parameter {x:.6}")]
    ArcThroughRoot { x: f64 },
    #[error("branch tracking failed: {0}")]
    BranchFailure(String),
    #[error("cycle endpoints must lie at two distinct roots of f")]
    CoincidentEndpoints,
    #[error("zeta polyline of the cycle is not embedded (segments {i} and {j} cross)")]
    NotEmbedded { i: usize, j: usize },
    #[error("cycle is not a positive Lagrangian (margin {margin:.3e} at u = {worst_u:.6})")]
    NotPositive { margin: f64, worst_u: f64 },
    #[error("cycles do not share an isotopy class: {0}")]
    NotIsotopic(String),
    #[error("point is within the singular-set exclusion radius")]
    AtSingularity,
    #[error("area form is singular at a branch point (f(ζ) = 0)")]
    AtBranchPoint,
    #[error("leaf trace came within the exclusion radius of a singular point")]
    SingularityApproach,
    #[error("leaf trace found no intersection with the target curve within the arclength budget")]
    NoIntersection,
    #[error("leaf intersects the target curve twice (input not positive or numerical failure)")]
    DoubleIntersection,
    #[error("adaptive step collapsed below 1e-12")]
    StepCollapse,
    #[error("time step unstable: {0}")]
    StepUnstable(String),
    #[error("geodesic stopped before reaching the requested time: {0}")]
    HorizonReached(String),
    #[error("independent area cross-check failed (residual {residual:.3e} > {tol:.3e})")]
    CrossCheckFailure { residual: f64, tol: f64 },
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

impl Error {
    /// Stable machine-readable kind string.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::EmptyPolynomial => "EmptyPolynomial",
            Error::DegenerateRoots { .. } => "DegenerateRoots",
            Error::BadSeed { .. } => "BadSeed",
            Error::StepTooLarge { .. } => "StepTooLarge",
            Error::ArcEndpointNotRoot { .. } => "ArcEndpointNotRoot",
            Error::ArcThroughRoot { .. } => "ArcThroughRoot",
            Error::BranchFailure(_) => "BranchFailure",
            Error::CoincidentEndpoints => "CoincidentEndpoints",
            Error::NotEmbedded { .. } => "NotEmbedded",
            Error::NotPositive { .. } => "NotPositive",
            Error::NotIsotopic(_) => "NotIsotopic",
            Error::AtSingularity => "AtSingularity",
            Error::AtBranchPoint => "AtBranchPoint",
            Error::SingularityApproach => "SingularityApproach",
            Error::NoIntersection => "NoIntersection",
            Error::DoubleIntersection => "DoubleIntersection",
            Error::StepCollapse => "StepCollapse",
            Error::StepUnstable(_) => "StepUnstable",
            Error::HorizonReached(_) => "HorizonReached",
            Error::CrossCheckFailure { .. } => "CrossCheckFailure",
            Error::InvalidInput(_) => "InvalidInput",
        }
    }

    pub fn class(&self) -> ErrorClass {
        match self {
            Error::EmptyPolynomial
            | Error::DegenerateRoots { .. }
            | Error::BadSeed { .. }
            | Error::ArcEndpointNotRoot { .. }
            | Error::ArcThroughRoot { .. }
            | Error::CoincidentEndpoints
            | Error::NotEmbedded { .. }
            | Error::NotPositive { .. }
            | Error::NotIsotopic(_)
            | Error::AtSingularity
            | Error::AtBranchPoint
            | Error::HorizonReached(_)
            | Error::InvalidInput(_) => ErrorClass::Domain,
            Error::StepTooLarge { .. }
            | Error::BranchFailure(_)
            | Error::SingularityApproach
            | Error::NoIntersection
            | Error::DoubleIntersection
            | Error::StepCollapse
            | Error::StepUnstable(_)
            | Error::CrossCheckFailure { .. } => ErrorClass::Numeric,
        }
    }
}
