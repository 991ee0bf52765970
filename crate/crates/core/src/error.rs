use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {what}: expected {expected}, found {found}")]
    Dimension {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("indicator {indicator}: category code {code} outside 1..={max}")]
    Category {
        indicator: usize,
        code: u16,
        max: usize,
    },
    #[error("invalid model specification: {0}")]
    InvalidSpec(String),
    #[error("invalid parameters: {0}")]
    InvalidParameters(String),
    #[error("dataset has no observations")]
    EmptyDataset,
    #[error("invalid data: {0}")]
    InvalidData(String),
    #[error("line {line}: {message}")]
    Csv { line: usize, message: String },
    #[error("invalid condition: {factor} = {value}")]
    InvalidCondition { factor: &'static str, value: String },
    #[error("unknown table kind '{0}' (valid: recovery, power, classification, eta, diagnostics, all)")]
    UnknownTable(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("record store: {0}")]
    Store(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code for the command-line tool, grouped by error category.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::UnknownTable(_) | Error::InvalidCondition { .. } => 2,
            Error::Csv { .. }
            | Error::Category { .. }
            | Error::InvalidData(_)
            | Error::EmptyDataset
            | Error::Dimension { .. } => 3,
            Error::InvalidSpec(_) | Error::InvalidParameters(_) => 4,
            Error::Io(_) | Error::Json(_) | Error::Store(_) => 5,
        }
    }
}
