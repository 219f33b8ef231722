use serde::{Deserialize, Serialize};

use super::WarmupParams;
use crate::stats::{
    anderson_darling_p_value, autocorr_adjusted_half_width, lag1_autocorrelation, lag1_threshold,
    GoodnessResult, RunningStats, StatsError,
};

/// `B` batch means over one trajectory. Batches fill left to right; a squeeze
/// merges adjacent pairs into the first half and doubles the batch size so
/// the second half can be refilled from new steps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchState {
    mu: Vec<f64>,
    bs: u64,
    filled: usize,
    acc: f64,
    acc_n: u64,
    steps: u64,
}

impl BatchState {
    pub fn new(batches: usize, batch_size: u64) -> Self {
        BatchState {
            mu: vec![0.0; batches],
            bs: batch_size,
            filled: 0,
            acc: 0.0,
            acc_n: 0,
            steps: 0,
        }
    }

    pub fn batch_size(&self) -> u64 {
        self.bs
    }

    /// Raw observations absorbed so far; `B * bs` whenever the array is full.
    pub fn steps_consumed(&self) -> u64 {
        self.steps
    }

    pub fn is_full(&self) -> bool {
        self.filled == self.mu.len()
    }

    /// Completed batch means.
    pub fn means(&self) -> &[f64] {
        &self.mu[..self.filled]
    }

    /// Adds one observation; returns true when it completes the array.
    pub fn push(&mut self, x: f64) -> bool {
        debug_assert!(!self.is_full());
        self.acc += x;
        self.acc_n += 1;
        self.steps += 1;
        if self.acc_n == self.bs {
            self.mu[self.filled] = self.acc / self.bs as f64;
            self.filled += 1;
            self.acc = 0.0;
            self.acc_n = 0;
        }
        self.is_full()
    }

    /// `mu[i] <- (mu[2i] + mu[2i+1]) / 2` for the first half, then `bs <- 2 bs`.
    pub fn squeeze(&mut self) {
        debug_assert!(self.is_full() && self.mu.len().is_multiple_of(2));
        let half = self.mu.len() / 2;
        for i in 0..half {
            self.mu[i] = (self.mu[2 * i] + self.mu[2 * i + 1]) / 2.0;
        }
        self.filled = half;
        self.bs *= 2;
    }
}

/// Tests on the batch means after discarding the first `b`: Anderson-Darling
/// normality against N(mean, s^2) and lag-1 autocorrelation. Variance at or
/// below `minVar` skips both and reports (p, rho) = (0, 0).
pub fn goodness_of_fit(mu: &[f64], params: &WarmupParams) -> Result<(GoodnessResult, bool), StatsError> {
    let kept = &mu[params.discard..];
    let st = RunningStats::from_slice(kept)?;
    let variance = st.variance();
    if variance <= params.min_var {
        let g = GoodnessResult { ad_p_value: 0.0, lag1: 0.0, variance, passed_by_low_variance: true };
        return Ok((g, true));
    }
    let ad_p_value = anderson_darling_p_value(kept, st.mean(), variance)?;
    let lag1 = lag1_autocorrelation(kept, st.mean(), variance)?;
    let g = GoodnessResult { ad_p_value, lag1, variance, passed_by_low_variance: false };
    let passed = ad_p_value > params.a_star && lag1 <= lag1_threshold(kept.len());
    Ok((g, passed))
}

/// Grand mean of the kept batch means and the correlation-adjusted
/// half-width; zero when the variance is at or below `minVar`.
pub fn batch_ci(
    mu: &[f64],
    params: &WarmupParams,
    alpha: f64,
    g: &GoodnessResult,
) -> Result<(f64, f64), StatsError> {
    let kept = &mu[params.discard..];
    let st = RunningStats::from_slice(kept)?;
    if g.passed_by_low_variance {
        return Ok((st.mean(), 0.0));
    }
    if g.lag1.abs() >= 1.0 {
        return Ok((st.mean(), f64::INFINITY));
    }
    Ok((st.mean(), autocorr_adjusted_half_width(&st, alpha, g.lag1)?))
}
