use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Errors produced anywhere in the toolkit.
///
/// The variants are grouped by who is at fault: bad input from the caller,
/// an impossible configuration, or a failure of the environment (IO).
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid label {label} for {loss} loss")]
    InvalidLabel { label: f64, loss: &'static str },

    #[error("degenerate leaf: hessian sum plus lambda is zero")]
    DegenerateLeaf,

    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    #[error("stratification failed: {0}")]
    Stratification(String),

    #[error("aerodynamic singularity at second {second}: normal load is not positive")]
    AerodynamicSingularity { second: usize },

    #[error("stale data: {0}")]
    StaleData(String),

    #[error("not found: {0}")]
    NotFound(String),

    #[error("too many features for exhaustive enumeration: {features} > {limit}")]
    TooManyFeatures { features: usize, limit: usize },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("usage error: {0}")]
    Usage(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Toml(#[from] toml::de::Error),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    /// True when the error was caused by the caller's data or arguments
    /// rather than by the environment.
    pub fn is_input_error(&self) -> bool {
        !matches!(self, Error::Io(_))
    }
}
