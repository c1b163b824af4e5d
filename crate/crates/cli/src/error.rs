use qsdlab_core::QsdError;
use qsdlab_neutron::NeutronError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: line {line}, column {column}: {msg}")]
    Config { path: String, line: usize, column: usize, msg: String },

    #[error("{0}")]
    Usage(String),

    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },

    #[error(transparent)]
    Core(#[from] QsdError),

    #[error(transparent)]
    Neutron(#[from] NeutronError),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl CliError {
    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Self::Io { path: path.as_ref().display().to_string(), source }
    }

    /// 2 for negative mathematical verdicts, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Core(e) if e.is_criteria_failure() => 2,
            _ => 1,
        }
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;
