use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    /// Bad configuration, arguments or inputs.
    #[error("validation error: {0}")]
    Validation(String),
    /// The simulator or learner left the numeric domain.
    #[error("numeric failure: {0}")]
    Numeric(String),
    /// A trace or report file does not match its schema.
    #[error("schema error at line {line}: {message}")]
    Schema { line: usize, message: String },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl HarnessError {
    /// Process exit code for this error: 2 for validation problems, 3 for
    /// numeric failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Numeric(_) => 3,
            _ => 2,
        }
    }
}

impl From<critgen_core::Error> for HarnessError {
    fn from(e: critgen_core::Error) -> Self {
        match e {
            critgen_core::Error::NumericDomain(m) => HarnessError::Numeric(m),
            other => HarnessError::Validation(other.to_string()),
        }
    }
}

impl From<serde_json::Error> for HarnessError {
    fn from(e: serde_json::Error) -> Self {
        HarnessError::Validation(format!("json: {e}"))
    }
}

impl From<csv::Error> for HarnessError {
    fn from(e: csv::Error) -> Self {
        HarnessError::Validation(format!("csv: {e}"))
    }
}

pub type Result<T, E = HarnessError> = std::result::Result<T, E>;
