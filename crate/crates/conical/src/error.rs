use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("point lies on the crossing set (|w| = {0:e})")]
    OnCrossingSet(f64),
    #[error("degenerate crossing: {0}")]
    DegenerateCrossing(String),
    #[error("step size collapsed at t = {t} (h = {h:e})")]
    StiffnessFailure { t: f64, h: f64 },
    #[error("trajectory grazes the crossing set without meeting it (closest |w| = {0:e})")]
    NearMiss(f64),
    #[error("initial vector is not a mode eigenvector (residual {0:e})")]
    NotAnEigenvector(f64),
    #[error("trajectory does not reach a crossing point")]
    NoCrossing,
    #[error("Hessian split is undefined at the crossing time")]
    AtCrossingTime,
    #[error("boundary shell holds {0:e} of the mass")]
    GridOverflow(f64),
    #[error("gamma function pole at {0}")]
    PoleOfGamma(Complex64),
    #[error("wave packet does not fit the box: {0}")]
    OutOfBox(String),
    #[error("packets do not meet at the same crossing: {0}")]
    CrossingMismatch(String),
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Errors raised by the numerics, as opposed to bad input.
    pub fn is_numerical(&self) -> bool {
        !matches!(self, Error::Invalid(_) | Error::Io(_) | Error::Json(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
