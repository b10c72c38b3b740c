use thiserror::Error;

/// Errors raised across the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("format error: {0}")]
    Format(String),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error("invalid state: {0}")]
    InvalidState(String),
    #[error("no interior maximum: {0}")]
    NoInteriorMaximum(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Names the file a format or parse error came from; any other error
    /// is reported as a format error of that file.
    pub fn in_file(self, path: &std::path::Path) -> Self {
        let at = path.display();
        match self {
            Error::Format(msg) => Error::Format(format!("{at}: {msg}")),
            Error::Parse { line, msg } => Error::Parse { line, msg: format!("{at}: {msg}") },
            other => Error::Format(format!("{at}: {other}")),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

macro_rules! invalid {
    ($($arg:tt)*) => {
        $crate::error::Error::InvalidArgument(format!($($arg)*))
    };
}
pub(crate) use invalid;
