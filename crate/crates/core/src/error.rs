use thiserror::Error;

/// Errors raised by model construction, estimation and I/O.
#[derive(Debug, Error)]
pub enum ParError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("non-stationary autoregressive coefficients: sum(rho) = {sum}")]
    NonStationary { sum: f64 },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("non-finite dynamic mean at linear predictor {eta}")]
    Domain { eta: f64 },

    #[error("singular design matrix in {0}")]
    Singular(&'static str),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("estimation failed: {0}")]
    Estimation(String),

    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    #[error("data error at line {line}: {msg}")]
    Data { line: usize, msg: String },

    #[error("format error: {0}")]
    Format(String),

    #[error("unknown table id `{0}`")]
    UnknownTable(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = ParError> = std::result::Result<T, E>;
