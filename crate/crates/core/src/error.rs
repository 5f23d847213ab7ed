use thiserror::Error;

/// Errors raised anywhere in the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("singular weighted normal matrix in {context} (condition estimate {condition:e})")]
    Singular { context: String, condition: f64 },

    #[error("all weights are zero in {0}")]
    DegenerateWeights(String),

    #[error("hyperparameter search failed: {0}")]
    SearchFailed(String),

    #[error("schema error: {0}")]
    Schema(String),

    #[error("ingestion error: {0}")]
    Ingestion(String),

    #[error("invalid input: {0}")]
    Input(String),

    #[error("improvement undefined: baseline RMSE is zero")]
    UndefinedImprovement,

    #[error("unknown synthetic regime `{0}`")]
    UnknownRegime(String),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Stable machine-readable identifier for the error variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Dimension(_) => "dimension",
            Error::Parameter(_) => "parameter",
            Error::NonFinite(_) => "non-finite",
            Error::Singular { .. } => "singular",
            Error::DegenerateWeights(_) => "degenerate-weights",
            Error::SearchFailed(_) => "search-failed",
            Error::Schema(_) => "schema",
            Error::Ingestion(_) => "ingestion",
            Error::Input(_) => "input",
            Error::UndefinedImprovement => "undefined-improvement",
            Error::UnknownRegime(_) => "unknown-regime",
            Error::Io(_) => "io",
            Error::Csv(_) => "csv",
            Error::Json(_) => "json",
        }
    }

    /// Prefix the fit context of solver errors, e.g. with a location index.
    pub fn in_context(self, context: impl std::fmt::Display) -> Self {
        match self {
            Error::Singular { context: inner, condition } => Error::Singular {
                context: format!("{context}: {inner}"),
                condition,
            },
            Error::DegenerateWeights(inner) => {
                Error::DegenerateWeights(format!("{context}: {inner}"))
            }
            other => other,
        }
    }
}
