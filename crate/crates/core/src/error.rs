use thiserror::Error;

/// Errors raised by state construction, POVM evaluation and joint-measurement routines.
///
/// Numeric payloads are widened to `f64` so the type does not depend on the scalar.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("non-finite component in input")]
    NonFinite,
    #[error("Bloch vector has length {norm}, outside the unit ball")]
    BlochOutOfBall { norm: f64 },
    #[error("matrix is not Hermitian (max deviation {deviation})")]
    NotHermitian { deviation: f64 },
    #[error("vector is not unit length (norm {norm})")]
    NotUnit { norm: f64 },
    #[error("InvalidPovm: {0}")]
    InvalidPovm(String),
    #[error("InvalidState: {0}")]
    InvalidState(String),
    #[error("sharpness factor {value} outside [-1, 1]")]
    AlphaOutOfRange { value: f64 },
    #[error("supplied angle {given} rad disagrees with a.a' (angle {derived} rad)")]
    InconsistentTheta { given: f64, derived: f64 },
    #[error(
        "NotSaturating: |alpha a + alpha' a'| + |alpha a - alpha' a'| = {bound_lhs}, expected 2"
    )]
    NotSaturating { bound_lhs: f64 },
    #[error("BoundViolated: sharpness bound exceeded, minimum effect eigenvalue {min_eigenvalue}")]
    BoundViolated { min_eigenvalue: f64 },
    #[error("DegenerateDirection: {0} vanishes")]
    DegenerateDirection(&'static str),
    #[error("ZeroAlpha: sharpness factors must be nonzero for the product form")]
    ZeroAlpha,
    #[error("CollinearDirections: a and a' are parallel, a_perp is undefined")]
    CollinearDirections,
    #[error("EtaOutOfRange: cloner shrink factor {eta} outside (0, 2/3]")]
    EtaOutOfRange { eta: f64 },
    #[error("sample size must be at least 1")]
    EmptySample,
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
