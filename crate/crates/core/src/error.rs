use thiserror::Error;

/// Errors raised across the scorecard toolkit.
#[derive(Debug, Error)]
pub enum Error {
    /// Caller supplied malformed input (dimension mismatch, out-of-range category, ...).
    #[error("invalid input: {0}")]
    Input(String),

    /// A configuration is internally inconsistent.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// An iterative routine produced a non-finite value.
    #[error("numeric failure at iteration {iteration}: {message}")]
    Numeric { iteration: usize, message: String },

    /// A file did not match the expected schema.
    #[error("schema error: {0}")]
    Schema(String),

    /// A row of a data file could not be parsed.
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    /// The requested search space exceeds the enumeration limit.
    #[error("search space too large: {estimate} points exceeds limit {limit}")]
    SearchSpace { estimate: f64, limit: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn input<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Input(msg.into()))
}

pub(crate) fn config<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Config(msg.into()))
}
