use thiserror::Error;

/// Errors raised by the simulation, predictor and certificate machinery.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch for {what}: expected {expected}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("solution diverged at t = {time}")]
    Divergence { time: f64 },
    #[error("domain error: {0}")]
    Domain(String),
    #[error("model does not declare the required hypothesis: {0}")]
    MissingHypothesis(&'static str),
    #[error("declared hypothesis violated: {0}")]
    HypothesisViolated(String),
    #[error("contraction requirement violated: L*T = {lt} >= 1")]
    ContractionViolated { lt: f64 },
    #[error("unsupported predictor scheme: {0}")]
    UnsupportedScheme(String),
    #[error("certificate refused: {0}")]
    CertificateRefused(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("decay fit failed: {0}")]
    Fit(String),
    #[error("certificate is not monotone in r: {0}")]
    NonMonotone(String),
    #[error("expression error: {0}")]
    Expression(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
