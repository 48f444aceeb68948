use std::fmt::Display;

use thiserror::Error;

/// Failure of one command, carrying its process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Infeasible(String),
    #[error("{0}")]
    Training(String),
    #[error("{failed} of {total} self-test suites failed")]
    Selftest { failed: usize, total: usize },
}

impl CliError {
    pub fn code(&self) -> u8 {
        match self {
            CliError::Selftest { .. } => 1,
            CliError::Config(_) => 2,
            CliError::Infeasible(_) => 3,
            CliError::Training(_) => 4,
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

pub fn config(msg: impl Display) -> CliError {
    CliError::Config(msg.to_string())
}

fn is_infeasible(e: &energon::Error) -> bool {
    matches!(
        e,
        energon::Error::InfeasibleBudget { .. } | energon::Error::NegativeCapacity(_)
    )
}

/// Outside training, anything but an infeasible budget is bad input.
impl From<energon::Error> for CliError {
    fn from(e: energon::Error) -> Self {
        if is_infeasible(&e) {
            CliError::Infeasible(e.to_string())
        } else {
            CliError::Config(e.to_string())
        }
    }
}

pub fn training(e: energon::Error) -> CliError {
    if is_infeasible(&e) {
        CliError::Infeasible(e.to_string())
    } else {
        CliError::Training(e.to_string())
    }
}
