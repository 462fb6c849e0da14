//! Configuration files, experiment orchestration and output files behind the
//! `crowd-mfg` binary.

mod config;
mod output;
mod run;

use std::path::PathBuf;

use serde::Serialize;
use thiserror::Error;

use crate::error::SolverError;

pub use config::{
    load_config, parse_config, parse_config_with, ExperimentConfig, ExperimentKind, GridConfig,
    HughesConfig, InitialDatum, OracleConfig, OracleVelocity, Origin, OutputConfig, ENV_PREFIX,
};
pub use output::{
    read_frame_csv, write_frame_csv, write_svg, FrameChannels, FrameRow, Manifest, FRAME_HEADER,
};
pub use run::{
    gradient_check_control, random_control, run_experiment, run_gradient_check,
    GradientCheckReport, RunReport,
};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{origin}: {message}")]
    Syntax { origin: Origin, message: String },

    #[error("{origin}: `{key}`: {message}")]
    Key {
        origin: Origin,
        key: String,
        message: String,
    },

    #[error("missing required key `{key}`")]
    Missing { key: String },

    #[error("invalid value for `{key}`: {message}")]
    Invalid { key: String, message: String },

    #[error(transparent)]
    Solver(#[from] SolverError),

    #[error("{module} did not converge after {iterations} iterations (residual {residual:.3e})")]
    NotConverged {
        module: &'static str,
        iterations: usize,
        residual: f64,
    },
}

/// Machine-readable description of a failed run, written as `failure.json`.
#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct FailureRecord {
    pub module: String,
    pub iteration: Option<usize>,
    pub residual: Option<f64>,
    pub message: String,
}

impl CliError {
    pub fn failure_record(&self) -> FailureRecord {
        let (module, iteration, residual) = match self {
            CliError::Solver(e) => (e.module().to_string(), e.iteration(), e.residual()),
            CliError::NotConverged {
                module,
                iterations,
                residual,
            } => (module.to_string(), Some(*iterations), Some(*residual)),
            CliError::Io { .. } => ("io".to_string(), None, None),
            _ => ("config".to_string(), None, None),
        };
        FailureRecord {
            module,
            iteration,
            residual,
            message: self.to_string(),
        }
    }
}
