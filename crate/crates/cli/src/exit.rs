use std::fmt;
use std::path::Path;

use reward_advancement::Error;

pub const INPUT: u8 = 2;
pub const CONVERGENCE: u8 = 3;
pub const SUPPORT: u8 = 4;
pub const VERIFICATION: u8 = 5;
pub const INFEASIBLE: u8 = 6;
pub const COVERAGE: u8 = 7;

/// A diagnostic paired with the process exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    message: String,
}

impl Failure {
    pub fn usage(message: impl Into<String>) -> Self {
        Self {
            code: INPUT,
            message: message.into(),
        }
    }

    pub fn verification(deviation: f64, tolerance: f64) -> Self {
        Self {
            code: VERIFICATION,
            message: format!("verification failed: max deviation {deviation:e} exceeds {tolerance:e}"),
        }
    }

    pub fn context(mut self, path: &Path) -> Self {
        self.message = format!("{}: {}", path.display(), self.message);
        self
    }
}

pub fn code_for(err: &Error) -> u8 {
    match err {
        Error::Nonconvergent { .. } | Error::QMagnitude { .. } | Error::CrossCheck { .. } => CONVERGENCE,
        Error::TargetSupport { .. } | Error::EntropyDomain { .. } => SUPPORT,
        Error::NoValidSolution { .. } | Error::RewardOutOfBounds { .. } | Error::NotAchievable { .. } => INFEASIBLE,
        Error::Coverage { .. } => COVERAGE,
        _ => INPUT,
    }
}

impl From<Error> for Failure {
    fn from(err: Error) -> Self {
        Self {
            code: code_for(&err),
            message: err.to_string(),
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}
