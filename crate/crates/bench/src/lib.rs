//! Benchmark harness: builds the graph-guided fused-lasso problem, runs the
//! configured solvers over several seeds and writes traces, a seed-averaged
//! aggregate, an SVG plot and a replayable manifest.

pub mod config;
pub mod inspect;
pub mod output;
pub mod plot;
pub mod runner;

use thiserror::Error;

pub use config::{DatasetConfig, RunConfig, SolverSpec, SyntheticKind};
pub use inspect::{inspect_dataset, DatasetSummary};
pub use runner::{build_problem, replay_manifest, run_benchmark, DatasetInfo, Manifest, ReplayReport, RunEntry, RunStatus};

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("invalid config: {0}")]
    Config(String),
    #[error("io error: {0}")]
    Io(String),
    #[error(transparent)]
    Data(#[from] asvrg_core::data_io::DataError),
    #[error(transparent)]
    Problem(#[from] asvrg_core::problem::ProblemError),
    #[error("replay: {0}")]
    Replay(String),
}

impl From<std::io::Error> for BenchError {
    fn from(e: std::io::Error) -> Self {
        BenchError::Io(e.to_string())
    }
}
