//! Error classification for the process exit contract: configuration
//! problems exit 1, numerical failures exit 2.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Numerical(String),
}

pub type Result<T> = std::result::Result<T, HarnessError>;

impl From<bethe_core::Error> for HarnessError {
    fn from(e: bethe_core::Error) -> Self {
        use bethe_core::Error::*;
        match e {
            InvalidModel(_) | InvalidArgument(_) | Parse { .. } | Io(_) => {
                HarnessError::Config(e.to_string())
            }
            TooLarge(_)
            | ZeroFactorCount { .. }
            | SingularExponent { .. }
            | NonFiniteMessage { .. }
            | Infeasible(_)
            | Numerical(_) => HarnessError::Numerical(e.to_string()),
        }
    }
}

impl From<std::io::Error> for HarnessError {
    fn from(e: std::io::Error) -> Self {
        HarnessError::Config(format!("i/o error: {e}"))
    }
}

pub fn exit_code(e: &HarnessError) -> i32 {
    match e {
        HarnessError::Config(_) => 1,
        HarnessError::Numerical(_) => 2,
    }
}
