use std::fmt;

use olsatt::Error as CoreError;

/// Process exit status for each failure class.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitClass {
    Usage = 1,
    Data = 2,
    Numerical = 3,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("parse error at row {row}, column '{column}': {message}")]
    Parse {
        /// 1-based data row (the header is row 0).
        row: usize,
        column: String,
        message: String,
    },
    #[error("column '{column}' is not numeric (first bad value '{value}' at row {row})")]
    NonNumericColumn {
        column: String,
        row: usize,
        value: String,
    },
    #[error("target column '{0}' not found")]
    MissingTarget(String),
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("{0}")]
    Data(String),
    #[error(transparent)]
    Core(#[from] CoreError),
}

impl CliError {
    pub fn io(path: impl fmt::Display, err: impl fmt::Display) -> Self {
        CliError::Io {
            path: path.to_string(),
            message: err.to_string(),
        }
    }

    pub fn class(&self) -> ExitClass {
        match self {
            CliError::Usage(_) => ExitClass::Usage,
            CliError::Parse { .. }
            | CliError::NonNumericColumn { .. }
            | CliError::MissingTarget(_)
            | CliError::Io { .. }
            | CliError::Data(_) => ExitClass::Data,
            CliError::Core(e) => match e {
                CoreError::InvalidArgument(_) | CoreError::RankOutOfRange { .. } => ExitClass::Usage,
                CoreError::DimensionMismatch(_) | CoreError::NonFinite(_) | CoreError::Parse { .. } => {
                    ExitClass::Data
                }
                _ => ExitClass::Numerical,
            },
        }
    }

    pub fn exit_code(&self) -> i32 {
        self.class() as i32
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
