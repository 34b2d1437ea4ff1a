use thiserror::Error;

/// Errors raised by the estimators, simulator and parsers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("category index {index} out of range 1..={m}")]
    Index { index: usize, m: usize },

    #[error("no one is tested: the overall testing rate is zero")]
    NoOneTested,

    #[error("empty sample: no tested individuals (N_T = 0)")]
    EmptySample,

    #[error("category never tested: testing probability is zero")]
    CategoryNeverTested,

    #[error("invalid partition: {0}")]
    Partition(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("degenerate model: {0}")]
    Degenerate(String),

    #[error("validation error: {0}")]
    Validation(String),

    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("{0}")]
    Io(String),
}

impl Error {
    /// True for errors caused by malformed or inconsistent input, as opposed
    /// to failures of the estimators on otherwise valid input.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::Partition(_)
                | Error::Config(_)
                | Error::Validation(_)
                | Error::Parse { .. }
                | Error::Io(_)
        )
    }

    pub(crate) fn parse(line: u64, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: message.into(),
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
