//! Parameter sweeps, result files and a Monte Carlo cross-check for the
//! `sgfs` solver stacks.

pub mod config;
pub mod montecarlo;
pub mod output;
pub mod run;
pub mod tables;

pub use config::{ExperimentConfig, OutputFormat};
pub use montecarlo::{mc_crosscheck, McReport};
pub use run::{run_config, run_single, Problem, ResultRow};
pub use tables::{run_table, table_configs, TableId};

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error(transparent)]
    Solver(#[from] sgfs::Error),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, BenchError>;
