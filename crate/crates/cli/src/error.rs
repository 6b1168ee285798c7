use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("cannot parse {path}: {message}")]
    ConfigParse { path: PathBuf, message: String },

    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },

    #[error("model is infeasible: {0}")]
    Infeasible(String),

    #[error("search budget exhausted before any feasible solution was found")]
    BudgetExhausted,

    #[error(transparent)]
    Core(#[from] ordscore_core::Error),
}

pub type Result<T> = std::result::Result<T, CliError>;

impl CliError {
    /// 0 success, 2 config/schema, 3 infeasible, 4 IO, 5 budget exhausted.
    pub fn exit_code(&self) -> u8 {
        use ordscore_core::Error as E;
        match self {
            CliError::Config(_) | CliError::ConfigParse { .. } => 2,
            CliError::Infeasible(_) => 3,
            CliError::Io { .. } => 4,
            CliError::BudgetExhausted => 5,
            CliError::Core(e) => match e {
                E::Io(_) => 4,
                E::Csv(c) if c.is_io_error() => 4,
                E::Numeric { .. } => 1,
                _ => 2,
            },
        }
    }
}

pub fn config<T>(msg: impl Into<String>) -> Result<T> {
    Err(CliError::Config(msg.into()))
}

pub fn io_at(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> CliError {
    let path = path.into();
    move |source| CliError::Io { path, source }
}
