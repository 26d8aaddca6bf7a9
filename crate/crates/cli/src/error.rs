//! Error-to-exit-code mapping: 0 success, 1 failed assertion,
//! 2 configuration/parse problem, 3 numerical abort.

use bachex_core::{FieldError, PdeError};

#[derive(Debug)]
pub enum CliError {
    /// malformed config, expression, or arguments (exit 2)
    Parse(String),
    /// a requested check did not hold (exit 1)
    Assertion(String),
    /// evaluation failed: domain, blow-up, stability bound (exit 3)
    Numerical(String),
}

impl CliError {
    pub fn code(&self) -> i32 {
        match self {
            CliError::Assertion(_) => 1,
            CliError::Parse(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Parse(m) => write!(f, "parse error: {m}"),
            CliError::Assertion(m) => write!(f, "assertion failed: {m}"),
            CliError::Numerical(m) => write!(f, "numerical abort: {m}"),
        }
    }
}

impl From<FieldError> for CliError {
    fn from(e: FieldError) -> CliError {
        CliError::Numerical(e.to_string())
    }
}

impl From<PdeError> for CliError {
    fn from(e: PdeError) -> CliError {
        CliError::Numerical(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> CliError {
        CliError::Parse(format!("io: {e}"))
    }
}
