use super::batch::batch_ci;
use super::warmup::{drive, DoublingLoop, RoundOutcome, StreamMachine, WarmupMachine};
use super::{unconverged_ci, SteadyEstimate, SteadyMethod, SteadyParams, WarmupEstimate};
use crate::error::{AnalysisError, Result};
use crate::sim::{ObservableId, Simulator};
use crate::stats::{CiResult, GoodnessResult};

enum Phase {
    Skip(u64),
    Warmup(WarmupMachine),
    Batches(DoublingLoop),
}

struct BmMachine {
    phase: Phase,
    params: SteadyParams,
    w_steps: u64,
    warmup: Option<WarmupEstimate>,
    outcome: Option<(CiResult, GoodnessResult, u64, u64)>,
}

impl BmMachine {
    fn new(params: &SteadyParams, fixed_warmup: Option<u64>) -> Self {
        let phase = match fixed_warmup {
            Some(0) => Phase::Batches(DoublingLoop::new(params.warmup, params.max_steps)),
            Some(w) => Phase::Skip(w),
            None => Phase::Warmup(WarmupMachine::new(params.warmup, params.max_steps)),
        };
        BmMachine {
            phase,
            params: params.clone(),
            w_steps: fixed_warmup.unwrap_or(0),
            warmup: None,
            outcome: None,
        }
    }

    fn estimate(self, observable: &ObservableId, method: SteadyMethod) -> SteadyEstimate {
        let (ci, g, steps, bs) = self
            .outcome
            .unwrap_or((unconverged_ci(&self.params.rule), GoodnessResult {
                ad_p_value: f64::NAN,
                lag1: f64::NAN,
                variance: f64::NAN,
                passed_by_low_variance: false,
            }, 0, 0));
        SteadyEstimate {
            observable: observable.clone(),
            method,
            ci,
            w_steps: self.w_steps,
            samples: steps,
            horizon: bs,
            horizontal_means: Vec::new(),
            percentile_interval: None,
            warmup: self.warmup,
            lag1: Some(g.lag1),
            ad_p_value: Some(g.ad_p_value),
        }
    }
}

impl StreamMachine for BmMachine {
    fn feed(&mut self, x: f64) -> Result<bool> {
        match &mut self.phase {
            Phase::Skip(left) => {
                *left -= 1;
                if *left == 0 {
                    self.phase = Phase::Batches(DoublingLoop::new(self.params.warmup, self.params.max_steps));
                }
                Ok(false)
            }
            Phase::Warmup(m) => {
                if !m.feed(x)? {
                    return Ok(false);
                }
                let est = m.result.expect("finished warmup");
                self.warmup = Some(est);
                self.w_steps = est.w_steps;
                if !est.converged {
                    return Ok(true);
                }
                self.phase = Phase::Batches(DoublingLoop::new(self.params.warmup, self.params.max_steps));
                Ok(false)
            }
            Phase::Batches(lp) => {
                let rule = self.params.rule;
                let wp = self.params.warmup;
                let mut last = None;
                let round = lp.feed(x, |mu, g, passed| {
                    let (mean, hw) = batch_ci(mu, &wp, rule.alpha, g)?;
                    let width_ok = CiResult::meets_target(2.0 * hw, mean, rule.delta, rule.delta_mode);
                    let converged = passed && width_ok;
                    last = Some((
                        CiResult {
                            estimate: mean,
                            half_width: hw,
                            n: (mu.len() - wp.discard) as u64,
                            alpha: rule.alpha,
                            delta: rule.delta,
                            delta_mode: rule.delta_mode,
                            converged,
                        },
                        *g,
                    ));
                    Ok(converged)
                })?;
                match round {
                    RoundOutcome::Pending => Ok(false),
                    RoundOutcome::Passed(_) | RoundOutcome::Exhausted(_) => {
                        let (ci, g) = last.expect("round evaluated");
                        self.outcome = Some((ci, g, lp.state.steps_consumed(), lp.state.batch_size()));
                        Ok(true)
                    }
                }
            }
        }
    }
}

fn run_bm(
    sim: &mut dyn Simulator,
    observables: &[ObservableId],
    params: &SteadyParams,
    seed: u64,
    fixed_warmup: Option<u64>,
) -> Result<Vec<SteadyEstimate>> {
    params.validate()?;
    if observables.is_empty() {
        return Err(AnalysisError::Invalid("no observables requested".into()));
    }
    let method = if fixed_warmup.is_some() { SteadyMethod::ManualBm } else { SteadyMethod::AutoBm };
    let mut machines: Vec<_> = observables.iter().map(|_| BmMachine::new(params, fixed_warmup)).collect();
    drive(sim, seed, observables, &mut machines)?;
    Ok(machines.into_iter().zip(observables).map(|(m, o)| m.estimate(o, method)).collect())
}

/// Batch means on one trajectory from `seed`: detect the warmup, continue
/// past it, and double a fresh batch size until the normality, correlation
/// and width tests all pass. The interval is inflated for residual lag-1
/// correlation of the batch means.
pub fn auto_bm(
    sim: &mut dyn Simulator,
    observables: &[ObservableId],
    params: &SteadyParams,
    seed: u64,
) -> Result<Vec<SteadyEstimate>> {
    run_bm(sim, observables, params, seed, None)
}

/// Batch means after fast-forwarding a fixed `w_fixed` steps.
pub fn manual_bm(
    sim: &mut dyn Simulator,
    observables: &[ObservableId],
    w_fixed: u64,
    params: &SteadyParams,
    seed: u64,
) -> Result<Vec<SteadyEstimate>> {
    run_bm(sim, observables, params, seed, Some(w_fixed))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{CalibrationKind, CalibrationSim};

    fn x() -> Vec<ObservableId> {
        vec![ObservableId::new("x").unwrap()]
    }

    #[test]
    fn constant_passes_immediately() {
        let mut sim = CalibrationSim::new(CalibrationKind::Constant { value: 2.0 }).unwrap();
        let p = SteadyParams::default();
        for e in [auto_bm(&mut sim, &x(), &p, 1).unwrap(), manual_bm(&mut sim, &x(), 0, &p, 1).unwrap()] {
            let e = &e[0];
            assert!(e.converged());
            assert_eq!((e.ci.estimate, e.ci.half_width), (2.0, 0.0));
            assert_eq!(e.samples, 2048);
        }
    }

    #[test]
    fn iid_estimate_independent_of_fast_forward() {
        let kind = CalibrationKind::IidNormal { mu: 1.0, sigma2: 1.0 };
        let mut sim = CalibrationSim::new(kind).unwrap();
        let p = SteadyParams::default();
        let a = manual_bm(&mut sim, &x(), 10, &p, 3).unwrap().remove(0);
        let b = manual_bm(&mut sim, &x(), 1_000_000, &p, 3).unwrap().remove(0);
        assert!(a.converged() && b.converged());
        assert!((a.ci.estimate - 1.0).abs() < 0.1 && (b.ci.estimate - 1.0).abs() < 0.1);
        assert!((a.ci.estimate - b.ci.estimate).abs() <= a.ci.half_width + b.ci.half_width);
        assert_eq!(b.w_steps, 1_000_000);
    }

    #[test]
    fn ar1_converges_with_stated_width() {
        let kind = CalibrationKind::Ar1 { phi: 0.9, mu: 5.0, sigma2: 1.0, x0: 0.0 };
        let mut sim = CalibrationSim::new(kind).unwrap();
        let e = auto_bm(&mut sim, &x(), &SteadyParams::default(), 11).unwrap().remove(0);
        assert!(e.converged());
        assert!(e.ci.width() <= 0.1);
        assert!((e.ci.estimate - 5.0).abs() < 0.15, "{}", e.ci.estimate);
        assert_eq!(e.ci.n, 124);
        assert!(e.warmup.unwrap().converged);
    }

    #[test]
    fn non_stationary_fails_to_converge() {
        let mut sim = CalibrationSim::new(CalibrationKind::Counter).unwrap();
        let p = SteadyParams { max_steps: 1 << 16, ..SteadyParams::default() };
        let e = auto_bm(&mut sim, &x(), &p, 1).unwrap().remove(0);
        assert!(!e.converged());
        assert!(!e.warmup.unwrap().converged);
    }
}
