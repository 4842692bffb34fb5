use thiserror::Error;

/// Crate-wide error type.
///
/// `InvalidArgument` and `Schema` mark caller mistakes (bad parameters, malformed
/// inputs) and map to exit code 2 in the CLI; the remaining variants are runtime
/// failures and map to exit code 1.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("schema violation: {0}")]
    Schema(String),

    #[error("row {row}, column {column}: {message}")]
    CsvData {
        /// 1-based data row number (header excluded).
        row: usize,
        column: String,
        message: String,
    },

    /// Legitimate configuration, but the data cannot support the operation
    /// (e.g. a complete-row method over a dataset with no complete rows).
    #[error("no usable input: {0}")]
    EmptyInput(String),

    /// A search or solver could not reach the requested target.
    #[error("unattainable: {0}")]
    Unattainable(String),

    /// A privacy-budget charge would exceed the configured (epsilon, delta).
    #[error("budget exceeded: {0}")]
    Budget(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    /// True for errors caused by bad arguments/inputs rather than runtime failure.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::InvalidArgument(_) | Error::Schema(_) | Error::CsvData { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
