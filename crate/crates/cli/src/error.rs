use std::fmt;

use stackstl::synth::{Status, SynthError};

/// Process exit codes.
pub mod code {
    pub const SUCCESS: u8 = 0;
    /// Monitor not satisfied, or certificate failed.
    pub const NEGATIVE: u8 = 1;
    pub const INFEASIBLE: u8 = 2;
    pub const ITERATION_LIMIT: u8 = 3;
    pub const INPUT: u8 = 4;
    pub const INTERNAL: u8 = 5;
}

pub fn status_code(s: Status) -> u8 {
    match s {
        Status::Success => code::SUCCESS,
        Status::Infeasible => code::INFEASIBLE,
        Status::IterationLimit => code::ITERATION_LIMIT,
    }
}

/// An error tagged with the exit code it maps to.
#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn input(message: impl Into<String>) -> Self {
        CliError {
            code: code::INPUT,
            message: message.into(),
        }
    }

    pub fn internal(message: impl Into<String>) -> Self {
        CliError {
            code: code::INTERNAL,
            message: message.into(),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

/// Model-size guards and scenario mismatches are the caller's fault; solver
/// and encoding failures are internal.
impl From<SynthError> for CliError {
    fn from(e: SynthError) -> Self {
        match e {
            SynthError::Dynamics(_) | SynthError::Stl(_) | SynthError::Mismatch(_) | SynthError::TooLarge { .. } => {
                CliError::input(e.to_string())
            }
            _ => CliError::internal(e.to_string()),
        }
    }
}
