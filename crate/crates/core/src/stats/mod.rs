//! Numerical routines shared by every estimator: streaming moments, Student-t
//! and non-central t distribution functions, the Anderson-Darling normality
//! test, lag-1 autocorrelation and confidence-interval widths.

mod ci;
mod dist;
mod normality;
mod running;

pub use ci::{
    autocorr_adjusted_half_width, ci_half_width, lag1_autocorrelation, lag1_threshold, CiResult,
    DeltaMode,
};
pub use dist::{
    non_central_t_cdf, normal_cdf, normal_quantile, student_t_cdf, student_t_pdf, t_quantile,
};
pub use normality::{anderson_darling_p_value, anderson_darling_statistic, GoodnessResult};
pub use running::RunningStats;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StatsError {
    #[error("insufficient data: need at least {needed} samples, got {got}")]
    InsufficientData { needed: u64, got: u64 },
    #[error("domain error: {0}")]
    Domain(String),
}
