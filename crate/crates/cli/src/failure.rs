use std::fmt;

use mtom_core::Error;

pub const EXIT_USAGE: u8 = 2;
pub const EXIT_FORMAT: u8 = 3;
pub const EXIT_NUMERIC: u8 = 4;

/// A command failure with the exit status it maps to.
#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Core(Error),
}

pub type CmdResult<T = ()> = Result<T, Failure>;

impl Failure {
    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::Usage(_) => EXIT_USAGE,
            Failure::Core(e) => match e {
                Error::InvalidArgument(_) => EXIT_USAGE,
                Error::Io(io) if io.kind() == std::io::ErrorKind::NotFound => EXIT_USAGE,
                Error::Format(_) | Error::Parse { .. } | Error::Degenerate(_) | Error::Io(_) => {
                    EXIT_FORMAT
                }
                Error::Numeric(_) | Error::InvalidState(_) | Error::NoInteriorMaximum(_) => {
                    EXIT_NUMERIC
                }
            },
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Usage(msg) => write!(f, "usage: {msg}"),
            Failure::Core(e) => write!(f, "{e}"),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Core(Error::Io(e))
    }
}

/// Attaches the offending path to a load failure.
pub fn with_path<T>(r: mtom_core::Result<T>, path: &std::path::Path) -> CmdResult<T> {
    r.map_err(|e| match e {
        Error::Io(io) if io.kind() == std::io::ErrorKind::NotFound => {
            Failure::Usage(format!("{}: file not found", path.display()))
        }
        Error::Io(io) => Failure::Core(Error::Format(format!("{}: {io}", path.display()))),
        other => Failure::Core(other),
    })
}

macro_rules! usage {
    ($($arg:tt)*) => {
        $crate::failure::Failure::Usage(format!($($arg)*))
    };
}
pub(crate) use usage;
