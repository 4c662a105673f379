use thiserror::Error;

/// Failure modes of the numerical pipeline.
///
/// Conditions that the analysis is expected to *report* (inconsistent
/// verdicts, suspected resonances, blow-up of the reduced model) are fields
/// of the corresponding reports, not variants here.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("no bound state: {0}")]
    NoSolution(String),

    #[error("Newton iteration did not converge: {0}")]
    NoConvergence(String),

    #[error("L+ is singular on the radial sector (smallest |eigenvalue| {0:.3e})")]
    SingularLinearization(f64),

    #[error("mass slope dq/domega = {0:.3e} is below tolerance")]
    DegenerateSlope(f64),

    #[error("eigensolve failed: {0}")]
    EigensolveFailure(String),

    #[error("spectrum is not symmetric under lambda -> -lambda: unmatched eigenvalue {re:.6e}{im:+.6e}i")]
    SymmetryViolation { re: f64, im: f64 },

    #[error("signature is degenerate: {0}")]
    Degenerate(String),

    #[error("kernel is ill-conditioned: singular value gap {0:.3e}")]
    IllConditioned(f64),

    #[error("eigenvalue tracking lost at epsilon = {0:.3e}")]
    TrackingLost(f64),

    #[error("requested Taylor order {order} exceeds nonlinearity smoothness {available}")]
    InsufficientSmoothness { order: usize, available: usize },

    #[error("resonant configuration: |m.lambda - omega| = {gap:.3e} for m = {m:?}")]
    ResonantConfiguration { m: Vec<usize>, gap: f64 },

    #[error("limiting absorption has no plateau: relative spread {0:.3e}")]
    NoExtrapolationPlateau(f64),

    #[error("energy {energy:.6} is not in the continuous spectrum above omega = {omega:.6}")]
    WrongSide { energy: f64, omega: f64 },

    #[error("domain error: {0}")]
    DomainError(String),

    #[error("time step {dt:.3e} exceeds the stability ceiling {ceiling:.3e}")]
    CflViolation { dt: f64, ceiling: f64 },

    #[error("non-finite field value at t = {0:.6}")]
    NaNDetected(f64),

    #[error("modulation decomposition failed: {0}")]
    DecompositionFailed(String),

    #[error("modulation Jacobian is degenerate (dq/domega = {0:.3e})")]
    DegenerateJacobian(f64),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
