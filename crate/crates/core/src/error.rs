use thiserror::Error;

/// Errors produced anywhere in the flow pipeline.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// The state left the volume gauge the polynomial systems were derived in.
    #[error("normalization violated: product {product} differs from {expected}")]
    NormalizationViolation { product: f64, expected: f64 },

    #[error("t = {t} lies outside the maximal interval ({lo}, {hi})")]
    DomainError { t: f64, lo: f64, hi: f64 },

    #[error("inconsistent initial data: {0}")]
    InconsistentInitialData(String),

    #[error("no asymptotic law for {0}")]
    UnknownCase(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("wrong case: {0}")]
    WrongCase(String),

    #[error("both bracket endpoints classify as {0}")]
    SameLabel(String),

    #[error("integration failed: {0}")]
    IntegrationFailure(String),
}

pub type Result<T> = std::result::Result<T, Error>;
