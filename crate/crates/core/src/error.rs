use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A kernel, design or fit parameter is outside its admissible range.
    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// Malformed data handed to an operation (NaN, length mismatch, duplicates).
    #[error("invalid input: {0}")]
    Input(String),

    /// Argument outside the mathematical domain of a function.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("shape error: {0}")]
    Shape(String),

    /// Operation not available for the fitted model's configuration.
    #[error("mode error: {0}")]
    Mode(String),

    /// Factorization failed even at the largest admissible jitter.
    #[error("correlation matrix of size {size} is not positive definite (last jitter tried: {jitter:e})")]
    Conditioning { size: usize, jitter: f64 },

    /// Power function evaluated below the clamp tolerance.
    #[error("power function value {value:e} is negative beyond tolerance (design size {size})")]
    NegativePower { value: f64, size: usize },

    #[error("config error in `{key}`: {message}")]
    Config { key: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for failures of the numerics (as opposed to bad arguments).
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::Conditioning { .. } | Error::NegativePower { .. })
    }

    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }

    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }

    pub(crate) fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            message: message.into(),
        }
    }
}
