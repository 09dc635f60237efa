use std::io;
use std::path::{Path, PathBuf};

use dbprior_core::Error as CoreError;

pub type Result<T> = std::result::Result<T, CliError>;

/// Every failure the harness reports. Each maps to one exit code and prints
/// as a single line starting with a fixed code word.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error("config: line {line}: key '{key}': {msg}")]
    ConfigKey { line: usize, key: String, msg: String },
    #[error("data: {0}")]
    Data(String),
    #[error("data: {path}: malformed file at byte {offset}: {msg}")]
    Format { path: PathBuf, offset: u64, msg: String },
    #[error("data: {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("numeric: {0}")]
    Numeric(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::ConfigKey { .. } => 2,
            CliError::Data(_) | CliError::Format { .. } | CliError::Io { .. } => 3,
            CliError::Numeric(_) => 4,
        }
    }

    pub fn code(&self) -> &'static str {
        match self.exit_code() {
            2 => "E_CONFIG",
            3 => "E_DATA",
            _ => "E_NUMERIC",
        }
    }

    /// `CODE: message` with any embedded newlines flattened.
    pub fn one_line(&self) -> String {
        format!("{}: {}", self.code(), self.to_string().replace(['\n', '\r'], " "))
    }

    pub fn io(path: &Path, source: io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    /// Core failures raised while validating configuration values.
    pub fn config_from(e: CoreError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::InvalidArgument(m) => CliError::Data(format!("invalid argument: {m}")),
            other => CliError::Numeric(other.to_string()),
        }
    }
}
