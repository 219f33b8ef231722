use super::{auto_warmup_many, unconverged_ci, SteadyEstimate, SteadyMethod, SteadyParams, WarmupEstimate};
use crate::error::{AnalysisError, Result};
use crate::exec::WorkerPool;
use crate::rng::SeedPlan;
use crate::sim::{ObservableId, Probe, SimError, Simulator};
use crate::transient::{run_blocks, CellKey, CellSampler, StopRule};

/// One cell per observable: the mean of steps `w+1..=m` of a replication.
struct HorizontalMeans {
    observables: Vec<ObservableId>,
    cells: Vec<CellKey>,
    w: u64,
    m: u64,
}

impl CellSampler for HorizontalMeans {
    fn cells(&self) -> &[CellKey] {
        &self.cells
    }

    fn sample(
        &self,
        sim: &mut dyn Simulator,
        seed: u64,
        _horizon: u64,
        active: &[bool],
    ) -> std::result::Result<Vec<f64>, SimError> {
        sim.reset(seed)?;
        let probes: Vec<Probe> =
            self.observables.iter().map(|o| sim.resolve(o)).collect::<std::result::Result<_, _>>()?;
        for _ in 0..self.w {
            sim.next()?;
        }
        let mut sums = vec![0.0; probes.len()];
        for _ in self.w..self.m {
            sim.next()?;
            for (k, &p) in probes.iter().enumerate() {
                if active[k] {
                    sums[k] += sim.read(p)?;
                }
            }
        }
        let len = (self.m - self.w) as f64;
        Ok(sums.into_iter().map(|s| s / len).collect())
    }
}

#[allow(clippy::too_many_arguments)]
fn run_rd(
    pool: &mut WorkerPool,
    observables: &[ObservableId],
    w: u64,
    m: u64,
    rule: &StopRule,
    plan: &SeedPlan,
    method: SteadyMethod,
    warmups: Option<&[WarmupEstimate]>,
) -> Result<Vec<SteadyEstimate>> {
    let sampler = HorizontalMeans {
        observables: observables.to_vec(),
        cells: observables.iter().map(|o| CellKey { label: o.to_string(), time: m }).collect(),
        w,
        m,
    };
    let (res, samples) = run_blocks(&sampler, rule, pool, plan, true)?;
    Ok(observables
        .iter()
        .zip(res.cells)
        .zip(samples)
        .enumerate()
        .map(|(i, ((obs, cell), means))| SteadyEstimate {
            observable: obs.clone(),
            method,
            ci: cell.ci,
            w_steps: w,
            samples: cell.ci.n,
            horizon: m,
            horizontal_means: means,
            percentile_interval: None,
            warmup: warmups.map(|ws| ws[i]),
            lag1: None,
            ad_p_value: None,
        })
        .collect())
}

/// Replication-deletion with an automatically detected warmup.
///
/// The warmup is estimated once per observable on the trajectory seeded by
/// `plan.trajectory_seed()`; all observables share `w` = the largest of them
/// and horizon `m = w * horizonMultiplier`. Replication `i` uses
/// `plan.derive_seed(i)`.
pub fn auto_rd(
    pool: &mut WorkerPool,
    observables: &[ObservableId],
    params: &SteadyParams,
    plan: &SeedPlan,
) -> Result<Vec<SteadyEstimate>> {
    params.validate()?;
    if observables.is_empty() {
        return Err(AnalysisError::Invalid("no observables requested".into()));
    }
    let warmups =
        auto_warmup_many(pool.primary(), observables, &params.warmup, params.max_steps, plan.trajectory_seed())?;
    let w = warmups.iter().map(|e| e.w_steps).max().unwrap_or(0);
    if warmups.iter().any(|e| !e.converged) {
        return Ok(observables
            .iter()
            .zip(&warmups)
            .map(|(obs, wu)| SteadyEstimate {
                observable: obs.clone(),
                method: SteadyMethod::AutoRd,
                ci: unconverged_ci(&params.rule),
                w_steps: w,
                samples: 0,
                horizon: 0,
                horizontal_means: Vec::new(),
                percentile_interval: None,
                warmup: Some(*wu),
                lag1: None,
                ad_p_value: None,
            })
            .collect());
    }
    let m = w
        .checked_mul(params.horizon_multiplier)
        .ok_or_else(|| AnalysisError::Invalid("replication horizon overflows".into()))?;
    run_rd(pool, observables, w, m, &params.rule, plan, SteadyMethod::AutoRd, Some(&warmups))
}

/// Replication-deletion with a user-supplied warmup `w` and horizon `m`.
/// With `percentiles`, also reports the 5th/95th percentile band of the
/// horizontal means (a descriptive band, not a confidence interval).
pub fn manual_rd(
    pool: &mut WorkerPool,
    observables: &[ObservableId],
    w: u64,
    m: u64,
    rule: &StopRule,
    plan: &SeedPlan,
    percentiles: bool,
) -> Result<Vec<SteadyEstimate>> {
    rule.validate()?;
    if w >= m {
        return Err(AnalysisError::Invalid(format!("warmup {w} must be below horizon {m}")));
    }
    if observables.is_empty() {
        return Err(AnalysisError::Invalid("no observables requested".into()));
    }
    let mut out = run_rd(pool, observables, w, m, rule, plan, SteadyMethod::ManualRd, None)?;
    if percentiles {
        for e in &mut out {
            e.percentile_interval = percentile_interval(&e.horizontal_means, 0.05, 0.95);
        }
    }
    Ok(out)
}

/// Linearly interpolated sample quantiles `(lo, hi)`; None for an empty sample.
pub fn percentile_interval(sample: &[f64], lo: f64, hi: f64) -> Option<(f64, f64)> {
    if sample.is_empty() {
        return None;
    }
    let mut s = sample.to_vec();
    s.sort_by(f64::total_cmp);
    let q = |p: f64| {
        let h = (s.len() - 1) as f64 * p;
        let (i, frac) = (h.floor() as usize, h - h.floor());
        if i + 1 < s.len() {
            s[i] + frac * (s[i + 1] - s[i])
        } else {
            s[i]
        }
    };
    Some((q(lo), q(hi)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{CalibrationKind, CalibrationSim};

    fn pool(kind: CalibrationKind, n: usize) -> WorkerPool {
        WorkerPool::build(n, || Ok(Box::new(CalibrationSim::new(kind)?))).unwrap()
    }

    fn x() -> Vec<ObservableId> {
        vec![ObservableId::new("x").unwrap()]
    }

    #[test]
    fn constant_converges_in_one_block() {
        let mut p = pool(CalibrationKind::Constant { value: 7.0 }, 1);
        let r = auto_rd(&mut p, &x(), &SteadyParams::default(), &SeedPlan::new(1)).unwrap();
        let e = &r[0];
        assert!(e.converged());
        assert_eq!((e.ci.estimate, e.ci.half_width, e.ci.n), (7.0, 0.0, 20));
        assert_eq!((e.w_steps, e.horizon), (2048, 4096));
        assert_eq!(e.horizontal_means.len(), 20);
    }

    #[test]
    fn counter_horizontal_mean_is_exact() {
        let mut p = pool(CalibrationKind::Counter, 3);
        let r = manual_rd(&mut p, &x(), 10, 20, &StopRule::default(), &SeedPlan::new(1), true).unwrap();
        // mean of 11..=20
        assert_eq!(r[0].ci.estimate, 15.5);
        assert_eq!(r[0].percentile_interval, Some((15.5, 15.5)));
    }

    #[test]
    fn iid_mean_is_covered() {
        let mut p = pool(CalibrationKind::IidNormal { mu: 5.0, sigma2: 1.0 }, 2);
        let r = auto_rd(&mut p, &x(), &SteadyParams::default(), &SeedPlan::new(4)).unwrap();
        let e = &r[0];
        assert!(e.converged());
        assert!((e.ci.estimate - 5.0).abs() < 0.1);
        assert!(e.ci.width() <= 0.1);
    }

    #[test]
    fn percentiles_interpolate() {
        let s: Vec<f64> = (0..=100).map(f64::from).collect();
        assert_eq!(percentile_interval(&s, 0.05, 0.95), Some((5.0, 95.0)));
        assert_eq!(percentile_interval(&[], 0.05, 0.95), None);
        assert_eq!(percentile_interval(&[1.0, 2.0], 0.5, 0.5), Some((1.5, 1.5)));
    }

    #[test]
    fn rejects_inverted_window() {
        let mut p = pool(CalibrationKind::Counter, 1);
        assert!(manual_rd(&mut p, &x(), 5, 5, &StopRule::default(), &SeedPlan::new(1), false).is_err());
    }
}
