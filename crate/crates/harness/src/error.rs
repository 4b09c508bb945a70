use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    /// Bad experiment document or flag; nothing was run.
    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Core(#[from] ggml_precoding::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, HarnessError>;

macro_rules! config_err {
    ($($arg:tt)+) => {
        $crate::error::HarnessError::Config(format!($($arg)+))
    };
}

pub(crate) use config_err;
