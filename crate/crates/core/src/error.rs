use thiserror::Error;

#[derive(Debug, Error)]
pub enum ZkError {
    /// A parameter lies outside the set where the operation is defined.
    #[error("domain error: {0}")]
    Domain(String),

    /// Non-finite or otherwise corrupt numeric input.
    #[error("data error: {0}")]
    Data(String),

    /// The caller violated a usage precondition.
    #[error("usage error: {0}")]
    Usage(String),

    #[error("instability at step {step}: {reason}")]
    Instability { step: usize, reason: String },

    #[error("convergence error: {0}")]
    Convergence(String),

    #[error("guard violation: {0}")]
    Guard(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, ZkError>;
