use alloc::string::String;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("no solution: {0}")]
    NoSolution(String),
    #[error("singular system: {0}")]
    SingularSystem(String),
    #[error("insufficient history: {0}")]
    InsufficientHistory(String),
    #[error("training diverged (non-finite loss) at epoch {epoch}")]
    TrainingFailure { epoch: usize },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
