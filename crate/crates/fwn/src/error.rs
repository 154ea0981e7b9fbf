use thiserror::Error;

#[derive(Debug, Error)]
pub enum FwnError {
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error("mode outside truncation: {0}")]
    ModeOutside(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("degree mismatch: {0} vs {1}")]
    DegreeMismatch(usize, usize),
    #[error("contraction of {m} slots exceeds available slots ({left}, {right})")]
    ContractionTooLarge { m: usize, left: usize, right: usize },
    #[error("sector violation: {0}")]
    Sector(String),
    #[error("operator is not in o(K,Γ): residual {0:e}")]
    NotSkew(f64),
    #[error("quadrature grid of {got} points per axis cannot resolve frequency {need}")]
    GridTooSmall { got: usize, need: usize },
    #[error("{0} modes exceed the occupation bitmask limit of 128")]
    ModeLimit(usize),
    #[error("vector is not normalized: |f|² = {0}")]
    NotNormalized(f64),
    #[error("config: {0}")]
    Config(String),
    #[error("partial sums decrease at ladder index {0}")]
    NonMonotone(usize),
    #[error("empty support")]
    EmptySupport,
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, FwnError>;
