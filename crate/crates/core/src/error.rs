use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// The building description (or another JSON input) does not match its schema.
    #[error("{message}{}", location(*.line, *.column))]
    Schema { message: String, line: Option<usize>, column: Option<usize> },

    #[error("network node `{0}` has no thermal path to any room air")]
    DisconnectedNode(String),

    #[error("nonpositive capacitance {value} J/K for `{label}`")]
    NonpositiveCapacitance { label: String, value: f64 },

    #[error("invalid parameters: {0}")]
    Parameters(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("negative airflow {value} kg/s on box {index}")]
    NegativeAirflow { index: usize, value: f64 },

    #[error("unstable discretization: spectral radius {radius:.9} exceeds 1 ({context})")]
    UnstableDiscretization { radius: f64, context: String },

    #[error("non-finite state {state} at step {step}")]
    NonFinite { step: usize, state: usize },

    #[error("covariance lost positive definiteness at step {0}")]
    Covariance(usize),

    #[error("numerically singular gains matrix (condition number {0:e})")]
    Singular(f64),

    #[error("horizon {horizon} exceeds available data ({available} steps)")]
    Horizon { horizon: usize, available: usize },

    #[error("no overlapping samples to score")]
    EmptyOverlap,

    #[error("mismatched configurations: {0}")]
    Mismatch(String),

    #[error("invalid dataset: {0}")]
    Dataset(String),

    #[error("invalid setting: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

fn location(line: Option<usize>, column: Option<usize>) -> String {
    match (line, column) {
        (Some(l), Some(c)) => format!(" (line {l}, column {c})"),
        (Some(l), None) => format!(" (line {l})"),
        _ => String::new(),
    }
}

impl Error {
    pub(crate) fn schema(message: impl Into<String>) -> Self {
        Error::Schema { message: message.into(), line: None, column: None }
    }

    /// Stable machine-readable code, used by the CLI's structured error output.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Schema { .. } => "E_SCHEMA",
            Error::DisconnectedNode(_) => "E_DISCONNECTED",
            Error::NonpositiveCapacitance { .. } => "E_CAPACITANCE",
            Error::Parameters(_) => "E_PARAMETERS",
            Error::Dimension(_) => "E_DIMENSION",
            Error::NegativeAirflow { .. } => "E_AIRFLOW",
            Error::UnstableDiscretization { .. } => "E_UNSTABLE",
            Error::NonFinite { .. } => "E_NONFINITE",
            Error::Covariance(_) => "E_COVARIANCE",
            Error::Singular(_) => "E_SINGULAR",
            Error::Horizon { .. } => "E_HORIZON",
            Error::EmptyOverlap => "E_EMPTY",
            Error::Mismatch(_) => "E_MISMATCH",
            Error::Dataset(_) => "E_DATASET",
            Error::Config(_) => "E_CONFIG",
            Error::Io(_) => "E_IO",
            Error::Csv(_) => "E_CSV",
            Error::Json(_) => "E_JSON",
        }
    }

    /// Source line of the offending input, when known.
    pub fn line(&self) -> Option<usize> {
        match self {
            Error::Schema { line, .. } => *line,
            _ => None,
        }
    }
}
