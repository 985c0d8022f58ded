//! Configuration, orchestration and reporting behind the `weakborn` binary.

mod commands;
mod config;
pub mod report;

use std::path::PathBuf;

use thiserror::Error;

pub use commands::{
    cmd_oracle_check, cmd_run, cmd_sweep, execute, set_parameter, ExecOptions, Execution,
    OracleCheck, OracleCheckSummary, SweepRow, SWEEP_PARAMETERS,
};
pub use config::{ExperimentConfig, ModeSpec, PreparationSpec, StandardErrorSpec, StateSpec};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid configuration at `{field}`: {message}")]
    ConfigInvalid { field: String, message: String },

    #[error("unknown sweep parameter `{0}`")]
    UnknownParameter(String),

    #[error(transparent)]
    Domain(#[from] crate::Error),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl CliError {
    /// Process exit code: 2 for configuration problems, 3 for a degenerate
    /// post-selection, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::ConfigInvalid { .. } | CliError::UnknownParameter(_) => 2,
            CliError::Domain(crate::Error::DegeneratePostSelection(_)) => 3,
            CliError::Domain(
                crate::Error::IdenticalMarks(_)
                | crate::Error::MarkOutOfRange { .. }
                | crate::Error::WindowTooWide { .. }
                | crate::Error::ThetaOutOfRange(_)
                | crate::Error::InvalidParameter { .. },
            ) => 2,
            _ => 1,
        }
    }

    pub fn hint(&self) -> Option<&'static str> {
        match self {
            CliError::ConfigInvalid { .. } => {
                Some("fix the named field; the schema is documented in README.md")
            }
            CliError::UnknownParameter(_) => Some(
                "sweepable parameters: shots_per_setting, replications, master_seed, theta, \
                 dark_rate, slm_phase_error_delta, analyzer_angle_error, pinhole_halfwidth",
            ),
            CliError::Domain(crate::Error::DegeneratePostSelection(_)) => Some(
                "the state has (numerically) zero overlap with the zero-momentum mode; \
                 pick a state whose amplitudes do not sum to zero",
            ),
            CliError::Domain(crate::Error::InsufficientCounts(_)) => {
                Some("raise shots_per_setting so every analyzer setting sees post-selected photons")
            }
            _ => None,
        }
    }
}
