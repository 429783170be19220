use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("schema error in field `{field}`: {reason}")]
    Schema { field: String, reason: String },

    #[error("index out of range: {0}")]
    Index(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("infeasible anchor: {0}")]
    InfeasibleAnchor(String),

    #[error("solver did not converge after {iterations} iterations (residual {residual:.3e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("instance too large: {0}")]
    TooLarge(String),

    #[error("unsupported configuration: {0}")]
    Unsupported(String),

    #[error("iteration {iteration}: {source}")]
    AtIteration {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("alignment error: {0}")]
    Alignment(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Short stable name of the variant, used as a status code in tables.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Config(_) => "config",
            Error::Schema { .. } => "schema",
            Error::Index(_) => "index",
            Error::Precondition(_) => "precondition",
            Error::InfeasibleAnchor(_) => "infeasible_anchor",
            Error::NonConvergence { .. } => "non_convergence",
            Error::TooLarge(_) => "too_large",
            Error::Unsupported(_) => "unsupported",
            Error::AtIteration { source, .. } => source.kind(),
            Error::Alignment(_) => "alignment",
            Error::Io { .. } => "io",
            Error::Csv(_) => "csv",
        }
    }

    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    pub(crate) fn schema(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Schema {
            field: field.into(),
            reason: reason.into(),
        }
    }
}
