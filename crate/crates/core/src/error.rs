use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid input: {0}")]
    Input(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    /// A shifted Gram/kernel matrix or covariance could not be inverted.
    #[error("singular matrix: {0}")]
    Singular(String),

    /// View covariance `X_m X_m^T` is rank deficient, so the primal problem is
    /// not defined. The dual form (GDMCCA) handles this case.
    #[error(
        "view {view}: covariance X X^T is rank deficient (smallest eigenvalue {min_eig:.3e}, \
         threshold {threshold:.3e}); use the dual variant (gdmcca) for D_m > N or collinear features"
    )]
    RankDeficient {
        view: usize,
        min_eig: f64,
        threshold: f64,
    },

    #[error("invalid state: {0}")]
    State(String),

    #[error("degenerate data: {0}")]
    Degenerate(String),

    #[error("{path}: row {row}, column {col}: {msg}")]
    Parse {
        path: String,
        row: usize,
        col: usize,
        msg: String,
    },

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Short machine-readable tag, used by the CLI error object.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Dimension(_) => "dimension",
            Error::Input(_) => "input",
            Error::Config(_) => "config",
            Error::Singular(_) => "singular",
            Error::RankDeficient { .. } => "rank_deficient",
            Error::State(_) => "state",
            Error::Degenerate(_) => "degenerate",
            Error::Parse { .. } => "parse",
            Error::Io { .. } => "io",
            Error::Json(_) => "json",
        }
    }

    pub fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        Error::Io {
            path: path.display().to_string(),
            source,
        }
    }
}
