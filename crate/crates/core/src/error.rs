use thiserror::Error;

/// Errors produced by the analysis, synthesis and simulation routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("zone is not of focus type (needs one real eigenvalue and a complex pair): {0}")]
    NotFocusType(String),
    #[error("observability matrix is singular (|det| = {det:e})")]
    NotObservable { det: f64 },
    #[error("zone matrices do not share their second and third columns (max gap {gap:e})")]
    NotContinuous { gap: f64 },
    #[error("malformed system specification: {0}")]
    Malformed(String),
    #[error("argument outside its domain: {0}")]
    Domain(String),
    #[error("modal matrix of the zone flow is singular")]
    SingularModalMatrix,
    #[error("no return to the separation plane for entry slope {slope}")]
    NoReturn { slope: f64 },
    #[error("point is not in the half-plane required by the {0} half-map")]
    WrongHalfPlane(&'static str),
    #[error("not applicable: {0}")]
    NotApplicable(String),
    #[error("angles/parameters violate the admissible synthesis region: {0}")]
    OmegaTildeViolation(String),
    #[error("synthesis produced a non-positive imaginary part ({which} = {value:e})")]
    NonPositiveBeta { which: &'static str, value: f64 },
    #[error("zero eigenvalue offset c = 0 has no closed-form angle synthesis; use the balanced construction")]
    ZeroOffset,
    #[error("synthesized system fails the existence conditions (residuals {0:?})")]
    SelfCheckFailed([f64; 3]),
    #[error("trajectory collapsed onto the origin at t = {t}")]
    OriginReached { t: f64 },
    #[error("trajectory diverged at t = {t}")]
    Diverged { t: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
