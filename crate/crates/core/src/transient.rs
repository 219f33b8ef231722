//! Transient mean estimation with a sequential confidence-interval stopping
//! rule, run for many (observable, time) cells at once over shared
//! replications.

use serde::{Deserialize, Serialize};

use crate::error::{AnalysisError, Result};
use crate::exec::WorkerPool;
use crate::rng::SeedPlan;
use crate::sim::{ObservableId, Probe, SimError, Simulator};
use crate::stats::{ci_half_width, CiResult, DeltaMode, RunningStats};

pub const DEFAULT_BLOCK_SIZE: u64 = 20;

/// Precision target and budget shared by the replication-based estimators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct StopRule {
    pub alpha: f64,
    /// Target full width of the interval (absolute, or relative to |mean|).
    pub delta: f64,
    pub delta_mode: DeltaMode,
    /// Replications per block; the stopping test runs after each block.
    pub block_size: u64,
    pub max_sims: Option<u64>,
}

impl Default for StopRule {
    fn default() -> Self {
        StopRule {
            alpha: 0.05,
            delta: 0.1,
            delta_mode: DeltaMode::Absolute,
            block_size: DEFAULT_BLOCK_SIZE,
            max_sims: None,
        }
    }
}

impl StopRule {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(AnalysisError::Invalid(format!("alpha {} outside (0, 1)", self.alpha)));
        }
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            return Err(AnalysisError::Invalid(format!("delta {} must be positive", self.delta)));
        }
        if self.block_size < 2 {
            return Err(AnalysisError::Invalid("block size must be at least 2".into()));
        }
        if self.max_sims.is_some_and(|m| m < 2) {
            return Err(AnalysisError::Invalid("maxSims must be at least 2".into()));
        }
        Ok(())
    }

    /// Half-width and convergence of a cell given its accumulated sample.
    pub fn check(&self, stats: &RunningStats) -> Result<CiResult> {
        let hw = ci_half_width(stats, self.alpha)?;
        Ok(CiResult {
            estimate: stats.mean(),
            half_width: hw,
            n: stats.count(),
            alpha: self.alpha,
            delta: self.delta,
            delta_mode: self.delta_mode,
            converged: CiResult::meets_target(2.0 * hw, stats.mean(), self.delta, self.delta_mode),
        })
    }

    fn next_block(&self, done: u64) -> u64 {
        match self.max_sims {
            Some(cap) => self.block_size.min(cap.saturating_sub(done)),
            None => self.block_size,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransientRequest {
    pub observables: Vec<ObservableId>,
    pub times: Vec<u64>,
    pub rule: StopRule,
}

impl TransientRequest {
    pub fn validate(&self) -> Result<()> {
        self.rule.validate()?;
        if self.observables.is_empty() {
            return Err(AnalysisError::Invalid("no observables requested".into()));
        }
        if self.times.is_empty() {
            return Err(AnalysisError::Invalid("no time points requested".into()));
        }
        if self.times.windows(2).any(|w| w[0] >= w[1]) {
            return Err(AnalysisError::Invalid("time points must be strictly increasing".into()));
        }
        Ok(())
    }
}

/// Identity of one estimated quantity.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CellKey {
    pub label: String,
    pub time: u64,
}

/// Produces one value per cell from a single replication.
pub trait CellSampler: Sync {
    fn cells(&self) -> &[CellKey];

    /// Runs one replication from `reset(seed)` for `horizon` steps and returns
    /// one value per cell. Entries for inactive cells or cells past the
    /// horizon are ignored by the caller.
    fn sample(
        &self,
        sim: &mut dyn Simulator,
        seed: u64,
        horizon: u64,
        active: &[bool],
    ) -> std::result::Result<Vec<f64>, SimError>;
}

/// Cells `observable x time`, observable-major.
pub struct ObservableGrid {
    observables: Vec<ObservableId>,
    times: Vec<u64>,
    cells: Vec<CellKey>,
}

impl ObservableGrid {
    pub fn new(observables: Vec<ObservableId>, times: Vec<u64>) -> Self {
        let cells = observables
            .iter()
            .flat_map(|o| times.iter().map(move |&t| CellKey { label: o.to_string(), time: t }))
            .collect();
        ObservableGrid { observables, times, cells }
    }
}

impl CellSampler for ObservableGrid {
    fn cells(&self) -> &[CellKey] {
        &self.cells
    }

    fn sample(
        &self,
        sim: &mut dyn Simulator,
        seed: u64,
        horizon: u64,
        active: &[bool],
    ) -> std::result::Result<Vec<f64>, SimError> {
        sim.reset(seed)?;
        let probes: Vec<Probe> =
            self.observables.iter().map(|o| sim.resolve(o)).collect::<std::result::Result<_, _>>()?;
        let nt = self.times.len();
        let mut out = vec![f64::NAN; self.cells.len()];
        let mut t = 0;
        for (j, &target) in self.times.iter().enumerate() {
            if target > horizon {
                break;
            }
            if !(0..probes.len()).any(|k| active[k * nt + j]) {
                continue;
            }
            while t < target {
                sim.next()?;
                t += 1;
            }
            for (k, &p) in probes.iter().enumerate() {
                if active[k * nt + j] {
                    out[k * nt + j] = sim.read(p)?;
                }
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransientCell {
    pub key: CellKey,
    /// Interval frozen at the block where the cell converged, or the latest
    /// one if it never did. `ci.n` counts the replications the cell used.
    pub ci: CiResult,
    pub variance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransientResult {
    pub cells: Vec<TransientCell>,
    pub total_sims: u64,
    /// The replication budget ran out before every cell converged.
    pub budget_exhausted: bool,
    pub warnings: Vec<String>,
}

impl TransientResult {
    pub fn all_converged(&self) -> bool {
        self.cells.iter().all(|c| c.ci.converged)
    }

    pub fn cell(&self, label: &str, time: u64) -> Option<&TransientCell> {
        self.cells.iter().find(|c| c.key.label == label && c.key.time == time)
    }
}

/// Estimates `E[obs_t]` for every requested observable and time.
pub fn auto_ir(request: &TransientRequest, pool: &mut WorkerPool, plan: &SeedPlan) -> Result<TransientResult> {
    request.validate()?;
    let grid = ObservableGrid::new(request.observables.clone(), request.times.clone());
    auto_ir_cells(&grid, &request.rule, pool, plan)
}

/// Block-sequential estimation over arbitrary cells. Replication `i` always
/// uses `plan.derive_seed(i)`; each cell stops receiving observations (and
/// keeps its interval) once its width meets the target.
pub fn auto_ir_cells(
    sampler: &dyn CellSampler,
    rule: &StopRule,
    pool: &mut WorkerPool,
    plan: &SeedPlan,
) -> Result<TransientResult> {
    run_blocks(sampler, rule, pool, plan, false).map(|(r, _)| r)
}

/// As [`auto_ir_cells`], also returning each cell's observations (those that
/// entered its interval) in replication order when `keep` is set.
pub(crate) fn run_blocks(
    sampler: &dyn CellSampler,
    rule: &StopRule,
    pool: &mut WorkerPool,
    plan: &SeedPlan,
    keep: bool,
) -> Result<(TransientResult, Vec<Vec<f64>>)> {
    rule.validate()?;
    let keys = sampler.cells();
    let mut stats = vec![RunningStats::new(); keys.len()];
    let mut cis: Vec<Option<CiResult>> = vec![None; keys.len()];
    let mut active = vec![true; keys.len()];
    let mut done = 0u64;
    let mut budget_exhausted = false;
    let mut warnings = Vec::new();
    let mut kept = vec![Vec::new(); if keep { keys.len() } else { 0 }];

    while active.iter().any(|&a| a) {
        let block = rule.next_block(done);
        if block == 0 {
            budget_exhausted = true;
            break;
        }
        let horizon = keys
            .iter()
            .zip(&active)
            .filter(|(_, &a)| a)
            .map(|(k, _)| k.time)
            .max()
            .unwrap_or(0);
        let task = |sim: &mut dyn Simulator, seed: u64| sampler.sample(sim, seed, horizon, &active);
        let rows = match pool.run(plan, done, block, &task) {
            Ok(rows) => rows,
            Err(source) => {
                let partial = assemble(keys, cis, &stats, rule, done, budget_exhausted, warnings);
                return Err(AnalysisError::Aborted { partial: Box::new(partial), source });
            }
        };
        for (offset, row) in rows.iter().enumerate() {
            for (c, &v) in row.iter().enumerate() {
                if !active[c] {
                    continue;
                }
                if !v.is_finite() {
                    return Err(AnalysisError::NonFinite {
                        cell: format!("{}@{}", keys[c].label, keys[c].time),
                        seed: plan.derive_seed(done + offset as u64),
                        value: v,
                    });
                }
                stats[c].push(v)?;
                if keep {
                    kept[c].push(v);
                }
            }
        }
        done += block;
        for c in 0..keys.len() {
            if !active[c] || stats[c].count() < 2 {
                continue;
            }
            let ci = rule.check(&stats[c])?;
            if ci.converged {
                active[c] = false;
                if rule.delta_mode == DeltaMode::Relative && ci.estimate.abs() < 1e-12 {
                    warnings.push(format!(
                        "{}@{}: mean is ~0, relative precision checked as absolute",
                        keys[c].label, keys[c].time
                    ));
                }
            }
            cis[c] = Some(ci);
        }
    }

    Ok((assemble(keys, cis, &stats, rule, done, budget_exhausted, warnings), kept))
}

fn assemble(
    keys: &[CellKey],
    cis: Vec<Option<CiResult>>,
    stats: &[RunningStats],
    rule: &StopRule,
    total_sims: u64,
    budget_exhausted: bool,
    warnings: Vec<String>,
) -> TransientResult {
    let cells = keys
        .iter()
        .zip(cis)
        .zip(stats)
        .map(|((key, ci), st)| {
            let ci = ci.unwrap_or(CiResult {
                estimate: st.mean(),
                half_width: f64::INFINITY,
                n: st.count(),
                alpha: rule.alpha,
                delta: rule.delta,
                delta_mode: rule.delta_mode,
                converged: false,
            });
            TransientCell { key: key.clone(), ci, variance: st.variance() }
        })
        .collect();
    TransientResult { cells, total_sims, budget_exhausted, warnings }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{CalibrationKind, CalibrationSim};

    fn pool(kind: CalibrationKind, n: usize) -> WorkerPool {
        WorkerPool::build(n, || Ok(Box::new(CalibrationSim::new(kind)?))).unwrap()
    }

    fn request(times: Vec<u64>, rule: StopRule) -> TransientRequest {
        TransientRequest { observables: vec![ObservableId::new("x").unwrap()], times, rule }
    }

    #[test]
    fn zero_variance_stops_after_one_block() {
        let mut p = pool(CalibrationKind::Constant { value: 3.0 }, 1);
        let r = auto_ir(&request(vec![1, 5], StopRule::default()), &mut p, &SeedPlan::new(1)).unwrap();
        assert_eq!(r.total_sims, 20);
        for c in &r.cells {
            assert!(c.ci.converged);
            assert_eq!(c.ci.half_width, 0.0);
            assert_eq!(c.ci.estimate, 3.0);
            assert_eq!(c.ci.n, 20);
        }
    }

    #[test]
    fn equal_variance_times_finish_together() {
        let mut p = pool(CalibrationKind::IidNormal { mu: 0.0, sigma2: 1.0 }, 1);
        let rule = StopRule { delta: 0.4, ..StopRule::default() };
        let r = auto_ir(&request(vec![1, 100], rule), &mut p, &SeedPlan::new(3)).unwrap();
        // Exchangeable cells: both see the same n when variance estimates agree
        // closely; the interval widths are tied to the same replications.
        let (a, b) = (&r.cells[0].ci, &r.cells[1].ci);
        assert!(a.converged && b.converged);
        assert!((a.n as i64 - b.n as i64).abs() <= 20, "{} vs {}", a.n, b.n);
    }

    #[test]
    fn budget_cap_flags_unconverged() {
        let mut p = pool(CalibrationKind::IidNormal { mu: 0.0, sigma2: 1.0 }, 1);
        let rule = StopRule { delta: 0.001, max_sims: Some(50), ..StopRule::default() };
        let r = auto_ir(&request(vec![1], rule), &mut p, &SeedPlan::new(3)).unwrap();
        assert!(r.budget_exhausted);
        assert_eq!(r.total_sims, 50);
        assert!(!r.cells[0].ci.converged);
        assert_eq!(r.cells[0].ci.n, 50);
    }

    #[test]
    fn counter_cells_have_exact_means() {
        let mut p = pool(CalibrationKind::Counter, 2);
        let r = auto_ir(&request(vec![0, 7, 30], StopRule::default()), &mut p, &SeedPlan::new(3)).unwrap();
        let est: Vec<f64> = r.cells.iter().map(|c| c.ci.estimate).collect();
        assert_eq!(est, [0.0, 7.0, 30.0]);
    }

    #[test]
    fn rejects_bad_requests() {
        let mut p = pool(CalibrationKind::Counter, 1);
        let plan = SeedPlan::new(0);
        assert!(auto_ir(&request(vec![], StopRule::default()), &mut p, &plan).is_err());
        assert!(auto_ir(&request(vec![3, 2], StopRule::default()), &mut p, &plan).is_err());
        let rule = StopRule { block_size: 1, ..StopRule::default() };
        assert!(auto_ir(&request(vec![1], rule), &mut p, &plan).is_err());
    }
}
