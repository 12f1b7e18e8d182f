//! Command implementations behind the `near` binary.

pub mod commands;
pub mod config;

use near_core::data::DataError;
use near_core::dsl::DslError;
use near_core::graph::GraphError;
use near_core::search::SearchError;
use thiserror::Error;

pub use commands::{
    eval, gen_data, probe, run_once, synthesize, DataSpec, ProbeOutput, ProgramFile, RunResult,
    Summary,
};
pub use config::{Algorithm, RunConfig};

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad config, spec, program or data file.
    #[error("{0}")]
    Input(String),
    /// The inputs were valid but the run failed.
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 2,
            CliError::Runtime(_) => 3,
        }
    }
}

impl From<DataError> for CliError {
    fn from(e: DataError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<DslError> for CliError {
    fn from(e: DslError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<GraphError> for CliError {
    fn from(e: GraphError) -> Self {
        match e {
            GraphError::Config(m) => CliError::Input(m),
            other => CliError::Runtime(other.to_string()),
        }
    }
}

impl From<SearchError> for CliError {
    fn from(e: SearchError) -> Self {
        match e {
            SearchError::Graph(g) => g.into(),
            other => CliError::Runtime(other.to_string()),
        }
    }
}
