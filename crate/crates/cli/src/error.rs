use serde::Serialize;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] thermident_core::Error),
    #[error("{message}")]
    Config { message: String, line: Option<usize> },
    #[error("output directory is locked by another run ({0})")]
    Locked(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl CliError {
    pub fn config(message: impl Into<String>) -> Self {
        CliError::Config { message: message.into(), line: None }
    }

    pub fn code(&self) -> &'static str {
        match self {
            CliError::Core(e) => e.code(),
            CliError::Config { .. } => "E_CONFIG",
            CliError::Locked(_) => "E_LOCKED",
            CliError::Io(_) => "E_IO",
            CliError::Json(_) => "E_JSON",
        }
    }

    pub fn line(&self) -> Option<usize> {
        match self {
            CliError::Core(e) => e.line(),
            CliError::Config { line, .. } => *line,
            _ => None,
        }
    }

    /// The structured form written to stderr.
    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct Report<'a> {
            code: &'a str,
            message: String,
            line: Option<usize>,
        }
        serde_json::to_string(&Report { code: self.code(), message: self.to_string(), line: self.line() })
            .unwrap_or_else(|_| format!("{{\"code\":\"{}\"}}", self.code()))
    }
}
