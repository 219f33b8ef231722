//! Welch's unequal-variance t-test and its power, applied cell by cell to two
//! transient experiments.

use serde::{Deserialize, Serialize};

use crate::error::{AnalysisError, Result};
use crate::stats::{non_central_t_cdf, t_quantile, StatsError};
use crate::transient::{CellKey, TransientResult};

/// `f_j + f_k` below this is treated as zero variance.
pub const DEGENERATE_TOLERANCE: f64 = 1e-15;

/// Sample mean, variance and size of one cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub mean: f64,
    pub variance: f64,
    pub n: u64,
}

impl CellSummary {
    fn f(&self) -> f64 {
        self.variance / self.n as f64
    }

    fn check(&self) -> std::result::Result<(), StatsError> {
        if self.n < 2 {
            return Err(StatsError::InsufficientData { needed: 2, got: self.n });
        }
        if !(self.variance >= 0.0) || !self.mean.is_finite() {
            return Err(StatsError::Domain(format!("invalid cell summary {self:?}")));
        }
        Ok(())
    }
}

/// Per-cell summaries of one experiment, in emission order.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub cells: Vec<(CellKey, CellSummary)>,
}

impl From<&TransientResult> for ExperimentSummary {
    fn from(r: &TransientResult) -> Self {
        ExperimentSummary {
            cells: r
                .cells
                .iter()
                .map(|c| (c.key.clone(), CellSummary { mean: c.ci.estimate, variance: c.variance, n: c.ci.n }))
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WelchOutcome {
    pub tau: f64,
    pub nu: f64,
    pub t_crit: f64,
    pub reject: bool,
    /// 1 - beta; 1 for degenerate cells.
    pub power: f64,
    pub degenerate: bool,
}

/// Satterthwaite degrees of freedom; `n_a + n_b - 2` when both variances vanish.
pub fn satterthwaite_nu(a: &CellSummary, b: &CellSummary) -> f64 {
    let (fa, fb) = (a.f(), b.f());
    let den = fa * fa / (a.n - 1) as f64 + fb * fb / (b.n - 1) as f64;
    if den == 0.0 {
        return (a.n + b.n - 2) as f64;
    }
    (fa + fb) * (fa + fb) / den
}

/// Two-sided Welch test of equal means at level `a_w`, with power
/// against a difference of `epsilon`.
///
/// Degenerate cells (`f_a + f_b < 1e-15`) get `tau` 0 for equal means and
/// +-inf otherwise, reject exactly when the means differ, and report power 1.
pub fn welch_test(a: &CellSummary, b: &CellSummary, a_w: f64, epsilon: f64) -> Result<WelchOutcome> {
    a.check()?;
    b.check()?;
    if !(a_w > 0.0 && a_w < 1.0) {
        return Err(AnalysisError::Invalid(format!("a_w {a_w} outside (0, 1)")));
    }
    let nu = satterthwaite_nu(a, b);
    let t_crit = t_quantile(nu, 1.0 - a_w / 2.0)?;
    let s = a.f() + b.f();
    let diff = a.mean - b.mean;
    if s < DEGENERATE_TOLERANCE {
        let tau = if diff == 0.0 { 0.0 } else { diff.signum() * f64::INFINITY };
        return Ok(WelchOutcome { tau, nu, t_crit, reject: diff != 0.0, power: 1.0, degenerate: true });
    }
    let tau = diff / s.sqrt();
    let power = welch_power(a, b, a_w, epsilon)?;
    Ok(WelchOutcome { tau, nu, t_crit, reject: tau.abs() > t_crit, power, degenerate: false })
}

/// `1 - T_nu(t_{nu, 1-a_w/2} | theta)` with `theta = |epsilon| / sqrt(f_a + f_b)`.
///
/// Only the upper rejection region is counted, so the value tends to `a_w/2`
/// as `epsilon -> 0`; see [`welch_power_two_sided`] for the full two-tail
/// probability. Degenerate cells report 1.
pub fn welch_power(a: &CellSummary, b: &CellSummary, a_w: f64, epsilon: f64) -> Result<f64> {
    power_impl(a, b, a_w, epsilon, false)
}

/// Probability that `|tau|` exceeds the critical value when the true
/// difference is `epsilon`: adds the lower-tail term `T_nu(-t | theta)`.
pub fn welch_power_two_sided(a: &CellSummary, b: &CellSummary, a_w: f64, epsilon: f64) -> Result<f64> {
    power_impl(a, b, a_w, epsilon, true)
}

fn power_impl(a: &CellSummary, b: &CellSummary, a_w: f64, epsilon: f64, both: bool) -> Result<f64> {
    a.check()?;
    b.check()?;
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(AnalysisError::Invalid(format!("epsilon {epsilon} must be positive")));
    }
    let s = a.f() + b.f();
    if s < DEGENERATE_TOLERANCE {
        return Ok(1.0);
    }
    let nu = satterthwaite_nu(a, b);
    let t_crit = t_quantile(nu, 1.0 - a_w / 2.0)?;
    let theta = epsilon.abs() / s.sqrt();
    let mut power = 1.0 - non_central_t_cdf(t_crit, nu, theta)?;
    if both {
        power += non_central_t_cdf(-t_crit, nu, theta)?;
    }
    Ok(power.clamp(0.0, 1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub key: CellKey,
    pub outcome: WelchOutcome,
}

/// Welch test for every cell; both experiments must cover the same cells.
pub fn compare_experiments(
    a: &ExperimentSummary,
    b: &ExperimentSummary,
    a_w: f64,
    epsilon: f64,
) -> Result<Vec<ComparisonRow>> {
    let lookup: std::collections::HashMap<&CellKey, &CellSummary> = b.cells.iter().map(|(k, c)| (k, c)).collect();
    let in_a: std::collections::HashSet<&CellKey> = a.cells.iter().map(|(k, _)| k).collect();
    let only_a: Vec<String> =
        a.cells.iter().filter(|(k, _)| !lookup.contains_key(k)).map(|(k, _)| cell_name(k)).collect();
    let only_b: Vec<String> =
        b.cells.iter().filter(|(k, _)| !in_a.contains(k)).map(|(k, _)| cell_name(k)).collect();
    if !only_a.is_empty() || !only_b.is_empty() {
        return Err(AnalysisError::GridMismatch { only_a, only_b });
    }
    a.cells
        .iter()
        .map(|(key, ca)| {
            let outcome = welch_test(ca, lookup[key], a_w, epsilon)?;
            Ok(ComparisonRow { key: key.clone(), outcome })
        })
        .collect()
}

fn cell_name(k: &CellKey) -> String {
    format!("{}@{}", k.label, k.time)
}
