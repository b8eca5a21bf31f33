use thiserror::Error;

#[derive(Debug, Error)]
pub enum LibrateError {
    #[error(transparent)]
    Interval(#[from] ivl::IvlError),

    #[error("invalid model parameter: {0}")]
    InvalidParameter(String),

    #[error("trajectory enclosure entered a collision neighborhood (r1={r1:.3e}, r2={r2:.3e})")]
    CollisionBox { r1: f64, r2: f64 },

    #[error("validated integration step failed to contract: {0}")]
    StepFailure(String),

    #[error("Poincare section crossing could not be isolated: {0}")]
    SectionFailure(String),

    #[error("verification failed: {0}")]
    VerificationFailed(String),

    #[error("matrix does not have the expected cone block structure: {0}")]
    BadBlockStructure(String),

    #[error("interval Newton inclusion failed: {0}")]
    InclusionFailed(String),

    #[error("eigen-decomposition failed: {0}")]
    EigenFailure(String),

    #[error("vanishing divisor in the order-{order} cohomology solve")]
    ResonanceDivisionFailure { order: usize },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("missing certificate: {0} (run the corresponding prove stage first)")]
    MissingCertificate(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, LibrateError>;
