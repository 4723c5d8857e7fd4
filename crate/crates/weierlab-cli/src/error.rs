//! CLI error type with the exit-code contract:
//! 2 for config/validation problems (including a non-expanding map),
//! 3 for zero variance in the CLT/LIL commands,
//! 4 for disagreeing regularity criteria,
//! 1 otherwise.

use thiserror::Error;
use weierlab::Error as LabError;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Lab(#[from] LabError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Lab(e) => match e {
                LabError::NotExpanding { .. }
                | LabError::InvalidParameter(_)
                | LabError::TruncationUnachievable { .. } => 2,
                LabError::ZeroVariance { .. } => 3,
                LabError::CriteriaDisagree { .. } => 4,
                LabError::ConvergenceFailure { .. }
                | LabError::BudgetExceeded { .. }
                | LabError::DegenerateDynamics { .. } => 1,
            },
            CliError::Io(_) => 1,
        }
    }
}
