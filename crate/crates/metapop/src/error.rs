use thiserror::Error;

/// Unified error type. The CLI maps `Io` to exit code 3 and everything else
/// to exit code 2 (user/configuration error).
#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    /// Malformed content in a data file (CSV row, TOML key, bad number, ...).
    #[error("{path}: {message}")]
    Data { path: String, message: String },

    /// Semantically invalid configuration or arguments.
    #[error("{0}")]
    Config(String),

    /// The ODE integrator produced a non-finite value.
    #[error("integration failed: state became non-finite at t = {time}")]
    IntegrationFailure { time: f64 },

    /// Calibration grid larger than the configured cap.
    #[error("calibration grid has {size} points, exceeding the cap of {cap}")]
    GridTooLarge { size: u128, cap: u64 },
}

impl Error {
    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub fn data(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Data { path: path.into(), message: message.into() }
    }

    pub fn config(message: impl Into<String>) -> Self {
        Error::Config(message.into())
    }
}
