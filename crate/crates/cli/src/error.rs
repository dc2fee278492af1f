use std::path::PathBuf;

use ensdiv::ErrorKind;
use serde_json::json;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] ensdiv::Error),
    #[error("{0}")]
    Config(String),
    #[error("invalid config file {path}: {source}")]
    ConfigFile { path: PathBuf, source: serde_json::Error },
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("writing output: {0}")]
    Output(#[from] std::io::Error),
    #[error("writing CSV: {0}")]
    Csv(#[from] csv::Error),
    #[error("writing JSON: {0}")]
    Json(#[from] serde_json::Error),
}

pub type CliResult<T> = Result<T, CliError>;

pub fn config(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

impl CliError {
    pub fn kind(&self) -> ErrorKind {
        match self {
            CliError::Core(e) => e.kind(),
            CliError::Config(_) | CliError::ConfigFile { .. } => ErrorKind::Config,
            CliError::Io { .. } | CliError::Output(_) | CliError::Csv(_) | CliError::Json(_) => ErrorKind::Io,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self.kind() {
            ErrorKind::Config => 2,
            ErrorKind::Io => 3,
            ErrorKind::Schema => 4,
            ErrorKind::EmptyData => 5,
            ErrorKind::NumericDomain => 6,
        }
    }

    /// One-line machine-readable form for stderr.
    pub fn to_json(&self) -> String {
        let kind = match self.kind() {
            ErrorKind::Config => "config",
            ErrorKind::Io => "io",
            ErrorKind::Schema => "schema",
            ErrorKind::EmptyData => "empty_data",
            ErrorKind::NumericDomain => "numeric_domain",
        };
        let mut body = json!({"kind": kind, "code": self.exit_code(), "message": self.to_string()});
        let path = match self {
            CliError::Io { path, .. } | CliError::ConfigFile { path, .. } => Some(path.display().to_string()),
            CliError::Core(ensdiv::Error::File { path, .. }) => Some(path.display().to_string()),
            _ => None,
        };
        if let Some(p) = path {
            body["path"] = p.into();
        }
        json!({ "error": body }).to_string()
    }
}
