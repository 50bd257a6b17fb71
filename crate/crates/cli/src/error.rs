use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error("io: {0}")]
    Io(String),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("model: {0}")]
    Model(#[from] superabsorb::Error),
    #[error("plot: {0}")]
    Plot(String),
    #[error("empty result: {0}")]
    EmptyResult(String),
}

impl CliError {
    /// Stable identifier written to `error.json`.
    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Io(_) => "io",
            CliError::Json(_) => "json",
            CliError::Csv(_) => "csv",
            CliError::Model(_) => "model",
            CliError::Plot(_) => "plot",
            CliError::EmptyResult(_) => "empty_result",
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Model(_) => 3,
            _ => 1,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}
