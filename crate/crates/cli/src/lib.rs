//! Command-line front end: scenario files in, result files out.

pub mod commands;
pub mod loader;
pub mod output;

use resilsim_core::indicators::IndicatorError;
use resilsim_core::matching::MatchError;
use resilsim_core::scenario::ScenarioError;
use resilsim_core::sim::SimError;
use thiserror::Error;

pub use loader::{load_scenario, scenario_to_toml};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("could not parse scenario: {0}")]
    Syntax(#[from] toml::de::Error),
    #[error("invalid scenario at `{path}`: {message}")]
    Schema { path: String, message: String },
    #[error("unknown reference at `{path}`: `{reference}` is not defined")]
    Dangling { path: String, reference: String },
    #[error(transparent)]
    Invalid(#[from] ScenarioError),
    #[error("bad team query: {0}")]
    Teams(#[from] MatchError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Indicator(#[from] IndicatorError),
}

impl CliError {
    /// Process exit code: 3 for problems with the input, 4 for failures
    /// while running. Argument parsing exits with 2 before we get here.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Syntax(_)
            | CliError::Schema { .. }
            | CliError::Dangling { .. }
            | CliError::Invalid(_)
            | CliError::Teams(_) => 3,
            CliError::Io(_) | CliError::Sim(_) | CliError::Indicator(_) => 4,
        }
    }
}
