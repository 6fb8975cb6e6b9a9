use std::fmt;
use std::path::Path;

use circle::ErrorKind;

pub const EXIT_USAGE: u8 = 2;
pub const EXIT_DATA: u8 = 3;
pub const EXIT_NUMERIC: u8 = 4;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(String),
    Internal(String),
    Lib(circle::Error),
}

impl CliError {
    pub fn io(path: &Path, e: std::io::Error) -> Self {
        CliError::Data(format!("{}: {e}", path.display()))
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Data(_) => EXIT_DATA,
            CliError::Internal(_) => EXIT_NUMERIC,
            CliError::Lib(e) => match e.kind() {
                ErrorKind::Data => EXIT_DATA,
                ErrorKind::Numeric | ErrorKind::Internal => EXIT_NUMERIC,
            },
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Data(m) => write!(f, "data error: {m}"),
            CliError::Internal(m) => write!(f, "internal error: {m}"),
            CliError::Lib(e) => write!(f, "{e}"),
        }
    }
}

impl From<circle::Error> for CliError {
    fn from(e: circle::Error) -> Self {
        CliError::Lib(e)
    }
}
