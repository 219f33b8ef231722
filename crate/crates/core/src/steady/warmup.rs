use serde::{Deserialize, Serialize};

use super::{goodness_of_fit, BatchState, WarmupParams};
use crate::error::{AnalysisError, Result};
use crate::sim::{ObservableId, Simulator};
use crate::stats::GoodnessResult;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct WarmupEstimate {
    /// `B * bs` at the round that passed (or the last round tried).
    pub w_steps: u64,
    pub passed_by_low_variance: bool,
    /// Number of batch-size doublings.
    pub iterations: u32,
    /// False when the step budget ran out first.
    pub converged: bool,
    pub final_test: GoodnessResult,
}

/// Consumes one observable's stream and reports when it is finished.
pub(crate) trait StreamMachine {
    fn feed(&mut self, x: f64) -> Result<bool>;
}

/// Batch-doubling loop shared by warmup detection and batch means.
pub(crate) struct DoublingLoop {
    pub state: BatchState,
    pub params: WarmupParams,
    pub max_steps: u64,
    pub iterations: u32,
}

pub(crate) enum RoundOutcome {
    Pending,
    Passed(GoodnessResult),
    Exhausted(GoodnessResult),
}

impl DoublingLoop {
    pub fn new(params: WarmupParams, max_steps: u64) -> Self {
        DoublingLoop {
            state: BatchState::new(params.batches, params.batch_size),
            params,
            max_steps,
            iterations: 0,
        }
    }

    /// Feeds one observation; at each full array runs `accept` on the batch
    /// means and either finishes, gives up on budget, or squeezes.
    pub fn feed(
        &mut self,
        x: f64,
        mut accept: impl FnMut(&[f64], &GoodnessResult, bool) -> Result<bool>,
    ) -> Result<RoundOutcome> {
        if !self.state.push(x) {
            return Ok(RoundOutcome::Pending);
        }
        let (g, passed) = goodness_of_fit(self.state.means(), &self.params)?;
        if accept(self.state.means(), &g, passed)? {
            return Ok(RoundOutcome::Passed(g));
        }
        if self.state.steps_consumed().saturating_mul(2) > self.max_steps {
            return Ok(RoundOutcome::Exhausted(g));
        }
        self.state.squeeze();
        self.iterations += 1;
        Ok(RoundOutcome::Pending)
    }
}

pub(crate) struct WarmupMachine {
    pub inner: DoublingLoop,
    pub result: Option<WarmupEstimate>,
}

impl WarmupMachine {
    pub fn new(params: WarmupParams, max_steps: u64) -> Self {
        WarmupMachine { inner: DoublingLoop::new(params, max_steps), result: None }
    }
}

impl StreamMachine for WarmupMachine {
    fn feed(&mut self, x: f64) -> Result<bool> {
        let (g, converged) = match self.inner.feed(x, |_, _, passed| Ok(passed))? {
            RoundOutcome::Pending => return Ok(false),
            RoundOutcome::Passed(g) => (g, true),
            RoundOutcome::Exhausted(g) => (g, false),
        };
        self.result = Some(WarmupEstimate {
            w_steps: self.inner.state.steps_consumed(),
            passed_by_low_variance: g.passed_by_low_variance && converged,
            iterations: self.inner.iterations,
            converged,
            final_test: g,
        });
        Ok(true)
    }
}

/// Resets `sim` with `seed` and feeds each observable's values (observed
/// after every step) to its machine until all machines finish.
pub(crate) fn drive<M: StreamMachine>(
    sim: &mut dyn Simulator,
    seed: u64,
    observables: &[ObservableId],
    machines: &mut [M],
) -> Result<u64> {
    let wrap = |e: crate::sim::SimError| AnalysisError::Sim(e.with_seed(seed));
    sim.reset(seed).map_err(wrap)?;
    let probes = observables
        .iter()
        .map(|o| sim.resolve(o))
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(AnalysisError::Sim)?;
    let mut done = vec![false; machines.len()];
    let mut remaining = machines.len();
    let mut steps = 0u64;
    while remaining > 0 {
        sim.next().map_err(wrap)?;
        steps += 1;
        for i in 0..machines.len() {
            if done[i] {
                continue;
            }
            let x = sim.read(probes[i]).map_err(wrap)?;
            if !x.is_finite() {
                return Err(AnalysisError::NonFinite {
                    cell: format!("{}@{}", observables[i], steps),
                    seed,
                    value: x,
                });
            }
            if machines[i].feed(x)? {
                done[i] = true;
                remaining -= 1;
            }
        }
    }
    Ok(steps)
}

/// Warmup length of one observable on the trajectory started from `seed`.
pub fn auto_warmup(
    sim: &mut dyn Simulator,
    observable: &ObservableId,
    params: &WarmupParams,
    max_steps: u64,
    seed: u64,
) -> Result<WarmupEstimate> {
    Ok(auto_warmup_many(sim, std::slice::from_ref(observable), params, max_steps, seed)?.remove(0))
}

/// Warmup lengths of several observables over one shared trajectory. Each
/// result equals what a separate run from the same seed would give.
pub fn auto_warmup_many(
    sim: &mut dyn Simulator,
    observables: &[ObservableId],
    params: &WarmupParams,
    max_steps: u64,
    seed: u64,
) -> Result<Vec<WarmupEstimate>> {
    params.validate()?;
    let mut machines: Vec<_> = observables.iter().map(|_| WarmupMachine::new(*params, max_steps)).collect();
    drive(sim, seed, observables, &mut machines)?;
    Ok(machines.into_iter().map(|m| m.result.expect("finished machine has a result")).collect())
}
