use thiserror::Error;

/// Errors surfaced by the pipeline. Variants distinguish bad inputs
/// (rejected up front) from numerical failures hit mid-run.
#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed header: {0}")]
    MalformedHeader(String),
    #[error("truncated data section: {0}")]
    Truncated(String),
    #[error("missing electrode {0}")]
    MissingElectrode(String),
    #[error("channel count mismatch: got {got}, expected {expected}")]
    ChannelMismatch { got: usize, expected: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("cannot balance: {0}")]
    CannotBalance(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("singular covariance: {0}")]
    SingularCovariance(String),
}

pub type Result<T> = std::result::Result<T, PipelineError>;
