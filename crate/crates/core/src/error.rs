use thiserror::Error;

/// Errors raised across the simulator, protocol, analysis and I/O layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("integration step too large: dt = {dt} ns with max rate {rate} rad/ns (dt*rate = {product:.3} > 0.5)")]
    StepTooLarge { dt: f64, rate: f64, product: f64 },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("config error at `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("config parse error: {0}")]
    ConfigParse(String),

    #[error("record error: {0}")]
    Record(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self::Config {
            field: field.into(),
            message: message.into(),
        }
    }

    /// True for errors caused by user-supplied configuration or input files.
    pub fn is_user_error(&self) -> bool {
        matches!(
            self,
            Self::Config { .. } | Self::ConfigParse(_) | Self::Record(_) | Self::InvalidInput(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
