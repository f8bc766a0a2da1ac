//! Command-line frontend: configuration, dispatch and record output.

pub mod commands;
pub mod config;
pub mod records;

use std::fmt;

/// Process exit status.
pub mod exit {
    pub const OK: i32 = 0;
    pub const TEST_FAILURE: i32 = 1;
    pub const CONFIG: i32 = 2;
    pub const NUMERIC: i32 = 3;
}

#[derive(Debug)]
pub enum CliError {
    /// Bad configuration, arguments or unsupported model: exit 2.
    Config(String),
    /// Quadrature or other numerical failure: exit 3.
    Numeric(String),
    /// Reading or writing files: exit 2, since the paths come from the user.
    Io(String),
}

impl CliError {
    pub fn config(e: impl fmt::Display) -> Self {
        CliError::Config(e.to_string())
    }

    pub fn io(e: impl fmt::Display) -> Self {
        CliError::Io(e.to_string())
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Io(_) => exit::CONFIG,
            CliError::Numeric(_) => exit::NUMERIC,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Numeric(m) => write!(f, "numeric error: {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<islands_core::Error> for CliError {
    fn from(e: islands_core::Error) -> Self {
        use islands_core::Error as E;
        match e {
            E::Numeric { .. } => CliError::Numeric(e.to_string()),
            E::Io(_) => CliError::Io(e.to_string()),
            E::InvalidArgument(_) | E::InvalidModel(_) | E::Unsupported(_) => {
                CliError::Config(e.to_string())
            }
        }
    }
}
