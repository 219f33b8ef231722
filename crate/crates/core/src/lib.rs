//! Statistical model checking for stochastic simulators: transient and
//! steady-state estimation with confidence-interval stopping rules, ergodicity
//! diagnostics, Welch comparisons and a query language over simulator runs.

// `!(x >= 0.0)` style checks deliberately reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod compare;
pub mod engine;
pub mod ergodicity;
pub mod error;
pub mod exec;
pub mod fmt;
pub mod models;
pub mod query;
pub mod rng;
pub mod sim;
pub mod stats;
pub mod steady;
pub mod transient;

pub use error::AnalysisError;
pub use exec::WorkerPool;
pub use rng::SeedPlan;
pub use sim::{ObservableId, SimError, Simulator};
pub use stats::{CiResult, DeltaMode};
