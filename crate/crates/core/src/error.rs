use thiserror::Error;

use crate::sim::SimError;
use crate::stats::StatsError;
use crate::transient::TransientResult;

/// Failure of an estimation procedure.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalysisError {
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error("invalid request: {0}")]
    Invalid(String),
    #[error("experiment grids differ: only in first {only_a:?}, only in second {only_b:?}")]
    GridMismatch { only_a: Vec<String>, only_b: Vec<String> },
    /// A replication failed; `partial` holds the blocks completed before it.
    #[error("analysis aborted after {} replications: {source}", .partial.total_sims)]
    Aborted {
        partial: Box<TransientResult>,
        #[source]
        source: SimError,
    },
    #[error("non-finite observation {value} for `{cell}` (seed {seed})")]
    NonFinite { cell: String, seed: u64, value: f64 },
}

pub type Result<T, E = AnalysisError> = std::result::Result<T, E>;
