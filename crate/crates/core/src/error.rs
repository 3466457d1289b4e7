use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("duplicate point at line {line} (coincides with an earlier row)")]
    DuplicatePoint { line: u64 },

    #[error("space contains no points")]
    EmptySpace,

    #[error("analytic Lebesgue measure is only available on full-space lattice samples; use an empirical measure")]
    AnalyticMeasureUnavailable,

    #[error("ball at vertex {center} with radius {radius} has zero mass")]
    ZeroMass { center: usize, radius: f64 },

    #[error("empty vertex set")]
    EmptySet,

    #[error("net is empty but the space is not")]
    EmptyNet,

    #[error("radius {radius} is below the comparability floor epsilon = {epsilon}")]
    BelowScaleFloor { radius: f64, epsilon: f64 },

    #[error("oracle restricted to tiny instances: {size} vertices (limit {limit})")]
    OracleTooLarge { size: usize, limit: usize },

    #[error("maximality violated: no net member within 2 epsilon of the query point")]
    MaximalityViolated,

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("not a nested embedding: base point missing at level {level}")]
    NotNested { level: usize },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
