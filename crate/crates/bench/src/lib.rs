//! Experiment runner behind the `csgopt` binary: replicate orchestration,
//! quantile summaries and plot-ready output.

use std::path::{Path, PathBuf};

pub mod experiment;
pub mod output;
pub mod quantile;
pub mod spec;

pub use experiment::{run_experiment, thread_count};
pub use output::{emit_output, ExperimentReport, Format, Series};
pub use quantile::{quantile_aggregate, QuantileRow, QuantileSummary};
pub use spec::{ExperimentKind, ExperimentSpec, OptimizerKind, ProblemKind, SpecOverrides};

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    /// Bad flags or an inconsistent spec; exit code 2.
    #[error("usage: {0}")]
    Usage(String),
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Optimizer(#[from] csgopt::CsgError),
}

impl BenchError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        BenchError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    /// Process exit code for this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            BenchError::Usage(_) => 2,
            _ => 1,
        }
    }
}
