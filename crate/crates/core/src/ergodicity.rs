//! Combines replication-deletion and batch means into a diagnostic for
//! stationarity and ergodicity of a steady-state mean.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::exec::WorkerPool;
use crate::rng::SeedPlan;
use crate::sim::ObservableId;
use crate::stats::{anderson_darling_p_value, CiResult, DeltaMode, RunningStats, StatsError};
use crate::steady::{auto_bm, auto_rd, SteadyEstimate, SteadyParams};

/// Significance of the normality test on the horizontal means.
pub const ERGODICITY_AD_LEVEL: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ErgodicityStatus {
    NonStationary,
    EvidenceOfNonErgodicity,
    NoEvidenceOfViolation,
}

impl ErgodicityStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            ErgodicityStatus::NonStationary => "NonStationary",
            ErgodicityStatus::EvidenceOfNonErgodicity => "EvidenceOfNonErgodicity",
            ErgodicityStatus::NoEvidenceOfViolation => "NoEvidenceOfViolation",
        }
    }
}

impl std::fmt::Display for ErgodicityStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErgodicityVerdict {
    pub observable: ObservableId,
    pub status: ErgodicityStatus,
    pub bm: Option<CiResult>,
    /// The headline estimate.
    pub rd: Option<CiResult>,
    pub ad_p_value: Option<f64>,
    /// `|bm - rd|`; NaN when either estimate is missing.
    pub discrepancy: f64,
}

/// The decision rule as a pure function of the two intervals and RD's
/// horizontal means. Returns the status and the normality p-value, if the
/// test ran. Horizontal means with variance at or below `min_var` pass the
/// normality step without testing.
pub fn decide(
    bm: &CiResult,
    rd: &CiResult,
    horizontal_means: &[f64],
    delta: f64,
    delta_mode: DeltaMode,
    min_var: f64,
) -> std::result::Result<(ErgodicityStatus, Option<f64>), StatsError> {
    if !bm.converged || !rd.converged {
        return Ok((ErgodicityStatus::NonStationary, None));
    }
    let discrepancy = (bm.estimate - rd.estimate).abs();
    if !CiResult::meets_target(discrepancy, rd.estimate, delta, delta_mode) {
        return Ok((ErgodicityStatus::EvidenceOfNonErgodicity, None));
    }
    let st = RunningStats::from_slice(horizontal_means)?;
    if st.variance() <= min_var {
        return Ok((ErgodicityStatus::NoEvidenceOfViolation, None));
    }
    let p = anderson_darling_p_value(horizontal_means, st.mean(), st.variance())?;
    let status = if p <= ERGODICITY_AD_LEVEL {
        ErgodicityStatus::EvidenceOfNonErgodicity
    } else {
        ErgodicityStatus::NoEvidenceOfViolation
    };
    Ok((status, Some(p)))
}

/// Verdict from already computed estimates of the same observable.
pub fn verdict_from(rd: &SteadyEstimate, bm: &SteadyEstimate, params: &SteadyParams) -> Result<ErgodicityVerdict> {
    let (status, ad_p_value) = decide(
        &bm.ci,
        &rd.ci,
        &rd.horizontal_means,
        params.rule.delta,
        params.rule.delta_mode,
        params.warmup.min_var,
    )?;
    let both = bm.ci.estimate.is_finite() && rd.ci.estimate.is_finite();
    Ok(ErgodicityVerdict {
        observable: rd.observable.clone(),
        status,
        bm: Some(bm.ci),
        rd: Some(rd.ci),
        ad_p_value,
        discrepancy: if both { (bm.ci.estimate - rd.ci.estimate).abs() } else { f64::NAN },
    })
}

/// Runs autoRD and autoBM for each observable separately and applies
/// [`decide`]. BM uses the plan's trajectory seed; RD its replication seeds.
pub fn diagnose_ergodicity(
    pool: &mut WorkerPool,
    observables: &[ObservableId],
    params: &SteadyParams,
    plan: &SeedPlan,
) -> Result<Vec<ErgodicityVerdict>> {
    observables
        .iter()
        .map(|obs| {
            let one = std::slice::from_ref(obs);
            let rd = auto_rd(pool, one, params, plan)?.remove(0);
            let bm = auto_bm(pool.primary(), one, params, plan.trajectory_seed())?.remove(0);
            verdict_from(&rd, &bm, params)
        })
        .collect()
}
