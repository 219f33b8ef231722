//! Steady-state mean estimation: warmup detection on one long trajectory,
//! replication-deletion over many short ones, and batch means.

mod batch;
mod bm;
mod rd;
mod warmup;

pub use batch::{batch_ci, goodness_of_fit, BatchState};
pub use bm::{auto_bm, manual_bm};
pub use rd::{auto_rd, manual_rd, percentile_interval};
pub use warmup::{auto_warmup, auto_warmup_many, WarmupEstimate};

use serde::{Deserialize, Serialize};

use crate::error::{AnalysisError, Result};
use crate::sim::ObservableId;
use crate::stats::CiResult;
use crate::transient::StopRule;

/// Default cap on raw steps per single-trajectory phase.
pub const DEFAULT_MAX_STEPS: u64 = 1 << 26;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct WarmupParams {
    /// Number of batches `B`.
    pub batches: usize,
    /// Leading batches `b` ignored by the tests.
    pub discard: usize,
    /// Initial batch size `bs`.
    pub batch_size: u64,
    pub min_var: f64,
    /// Significance level of the normality test.
    pub a_star: f64,
}

impl Default for WarmupParams {
    fn default() -> Self {
        WarmupParams { batches: 128, discard: 4, batch_size: 16, min_var: 1e-7, a_star: 0.01 }
    }
}

impl WarmupParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(AnalysisError::Invalid(m.into()));
        if !self.batches.is_multiple_of(2) {
            return bad("batch count B must be even");
        }
        if self.batches < self.discard + 8 {
            return bad("B - b must be at least 8 for the normality test");
        }
        if self.batch_size < 1 {
            return bad("initial batch size must be at least 1");
        }
        if !(self.min_var >= 0.0) {
            return bad("minVar must be non-negative");
        }
        if !(self.a_star > 0.0 && self.a_star < 1.0) {
            return bad("normality significance must lie in (0, 1)");
        }
        Ok(())
    }

    /// Steps consumed by the first round.
    pub fn initial_steps(&self) -> u64 {
        self.batches as u64 * self.batch_size
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SteadyParams {
    pub warmup: WarmupParams,
    pub rule: StopRule,
    /// Replication horizon `m = w * horizonMultiplier`.
    pub horizon_multiplier: u64,
    /// Cap on raw steps for each single-trajectory phase.
    pub max_steps: u64,
}

impl Default for SteadyParams {
    fn default() -> Self {
        SteadyParams {
            warmup: WarmupParams::default(),
            rule: StopRule::default(),
            horizon_multiplier: 2,
            max_steps: DEFAULT_MAX_STEPS,
        }
    }
}

impl SteadyParams {
    pub fn validate(&self) -> Result<()> {
        self.warmup.validate()?;
        self.rule.validate()?;
        if self.horizon_multiplier < 2 {
            return Err(AnalysisError::Invalid("horizon multiplier must be at least 2".into()));
        }
        if self.max_steps < self.warmup.initial_steps() {
            return Err(AnalysisError::Invalid(format!(
                "maxSteps {} is below one round of B*bs = {} steps",
                self.max_steps,
                self.warmup.initial_steps()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum SteadyMethod {
    AutoRd,
    AutoBm,
    ManualRd,
    ManualBm,
}

impl SteadyMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            SteadyMethod::AutoRd => "autoRD",
            SteadyMethod::AutoBm => "autoBM",
            SteadyMethod::ManualRd => "manualRD",
            SteadyMethod::ManualBm => "manualBM",
        }
    }

    pub fn is_rd(self) -> bool {
        matches!(self, SteadyMethod::AutoRd | SteadyMethod::ManualRd)
    }
}

impl std::str::FromStr for SteadyMethod {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "autord" | "rd" => Ok(SteadyMethod::AutoRd),
            "autobm" | "bm" => Ok(SteadyMethod::AutoBm),
            "manualrd" => Ok(SteadyMethod::ManualRd),
            "manualbm" => Ok(SteadyMethod::ManualBm),
            other => Err(format!("unknown steady-state method `{other}`")),
        }
    }
}

impl std::fmt::Display for SteadyMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A steady-state mean estimate for one observable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SteadyEstimate {
    pub observable: ObservableId,
    pub method: SteadyMethod,
    /// `ci.n` counts replications (RD) or kept batch means (BM).
    pub ci: CiResult,
    /// Steps treated as warmup.
    pub w_steps: u64,
    /// RD: replications run. BM: raw steps consumed after the warmup.
    pub samples: u64,
    /// RD: the per-replication horizon `m`. BM: final batch size.
    pub horizon: u64,
    /// RD only: horizontal means that entered the interval, in replication order.
    pub horizontal_means: Vec<f64>,
    /// manualRD only: 5th and 95th percentiles of the horizontal means.
    pub percentile_interval: Option<(f64, f64)>,
    pub warmup: Option<WarmupEstimate>,
    /// BM only: lag-1 autocorrelation and normality p-value of the final batch means.
    pub lag1: Option<f64>,
    pub ad_p_value: Option<f64>,
}

impl SteadyEstimate {
    pub fn converged(&self) -> bool {
        self.ci.converged
    }
}

fn unconverged_ci(rule: &StopRule) -> CiResult {
    CiResult {
        estimate: f64::NAN,
        half_width: f64::INFINITY,
        n: 0,
        alpha: rule.alpha,
        delta: rule.delta,
        delta_mode: rule.delta_mode,
        converged: false,
    }
}
