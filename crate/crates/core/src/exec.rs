//! Deterministic fan-out of replications over a fixed set of simulator
//! handles.
//!
//! A batch of consecutive replication indices is split into contiguous
//! chunks, one per handle. Results come back in index order regardless of the
//! number of handles, so any fold over them is bit-identical for every degree
//! of parallelism.

use std::panic::{catch_unwind, AssertUnwindSafe};

use crate::rng::SeedPlan;
use crate::sim::{SimError, Simulator};

/// Work for one replication: given a handle and the replication's seed,
/// produce its output vector.
pub type Task<'a> = dyn Fn(&mut dyn Simulator, u64) -> Result<Vec<f64>, SimError> + Sync + 'a;

pub struct WorkerPool {
    sims: Vec<Box<dyn Simulator>>,
    counts: Vec<u64>,
}

impl WorkerPool {
    pub fn new(sims: Vec<Box<dyn Simulator>>) -> Self {
        assert!(!sims.is_empty(), "a worker pool needs at least one simulator");
        let counts = vec![0; sims.len()];
        WorkerPool { sims, counts }
    }

    pub fn single(sim: Box<dyn Simulator>) -> Self {
        WorkerPool::new(vec![sim])
    }

    /// Builds `n` handles with `make`.
    pub fn build(
        n: usize,
        mut make: impl FnMut() -> Result<Box<dyn Simulator>, SimError>,
    ) -> Result<Self, SimError> {
        let sims = (0..n.max(1)).map(|_| make()).collect::<Result<Vec<_>, _>>()?;
        Ok(WorkerPool::new(sims))
    }

    pub fn parallelism(&self) -> usize {
        self.sims.len()
    }

    /// Replications executed by each handle so far.
    pub fn replications_per_worker(&self) -> &[u64] {
        &self.counts
    }

    pub fn total_replications(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// The handle used for single-trajectory analyses.
    pub fn primary(&mut self) -> &mut dyn Simulator {
        self.sims[0].as_mut()
    }

    /// Runs replications `first..first + count` with seeds from `plan`.
    ///
    /// On failure the error of the lowest failing index is returned, wrapped
    /// with that replication's seed; the pool stays usable.
    pub fn run(
        &mut self,
        plan: &SeedPlan,
        first: u64,
        count: u64,
        task: &Task<'_>,
    ) -> Result<Vec<Vec<f64>>, SimError> {
        let workers = (self.sims.len() as u64).min(count).max(1) as usize;
        let base = count / workers as u64;
        let extra = count % workers as u64;
        let mut ranges = Vec::with_capacity(workers);
        let mut start = first;
        for w in 0..workers {
            let len = base + u64::from((w as u64) < extra);
            ranges.push(start..start + len);
            start += len;
        }

        let chunk = |sim: &mut dyn Simulator, range: std::ops::Range<u64>| {
            let mut out = Vec::with_capacity((range.end - range.start) as usize);
            for idx in range {
                let seed = plan.derive_seed(idx);
                let r = catch_unwind(AssertUnwindSafe(|| task(sim, seed)))
                    .unwrap_or_else(|p| Err(SimError::Fault(panic_message(&p))));
                match r {
                    Ok(v) => out.push(v),
                    Err(e) => return (out, Some(e.with_seed(seed))),
                }
            }
            (out, None)
        };

        let results: Vec<(Vec<Vec<f64>>, Option<SimError>)> = if workers == 1 {
            vec![chunk(self.sims[0].as_mut(), ranges[0].clone())]
        } else {
            std::thread::scope(|scope| {
                let handles: Vec<_> = self
                    .sims
                    .iter_mut()
                    .zip(ranges.iter().cloned())
                    .map(|(sim, range)| {
                        let chunk = &chunk;
                        scope.spawn(move || chunk(sim.as_mut(), range))
                    })
                    .collect();
                handles.into_iter().map(|h| h.join().expect("worker panics are caught")).collect()
            })
        };

        let mut rows = Vec::with_capacity(count as usize);
        let mut failure = None;
        for (w, (out, err)) in results.into_iter().enumerate() {
            self.counts[w] += out.len() as u64;
            if failure.is_none() {
                rows.extend(out);
                failure = err;
            }
        }
        match failure {
            Some(e) => Err(e),
            None => Ok(rows),
        }
    }
}

fn panic_message(payload: &Box<dyn std::any::Any + Send>) -> String {
    let msg = payload
        .downcast_ref::<&str>()
        .map(|s| s.to_string())
        .or_else(|| payload.downcast_ref::<String>().cloned())
        .unwrap_or_else(|| "unknown panic".into());
    format!("simulator panicked: {msg}")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{CalibrationKind, CalibrationSim};
    use crate::sim::ObservableId;

    fn pool(n: usize) -> WorkerPool {
        WorkerPool::build(n, || {
            Ok(Box::new(CalibrationSim::new(CalibrationKind::IidNormal { mu: 0.0, sigma2: 1.0 })?))
        })
        .unwrap()
    }

    fn draw(sim: &mut dyn Simulator, seed: u64) -> Result<Vec<f64>, SimError> {
        sim.reset(seed)?;
        sim.next()?;
        Ok(vec![sim.eval(&ObservableId::new("x")?)?, seed as f64])
    }

    #[test]
    fn identical_across_parallelism() {
        let plan = SeedPlan::new(42);
        let reference = pool(1).run(&plan, 3, 37, &draw).unwrap();
        for n in [2, 4, 8, 64] {
            let mut p = pool(n);
            assert_eq!(p.run(&plan, 3, 37, &draw).unwrap(), reference);
            assert_eq!(p.total_replications(), 37);
        }
    }

    #[test]
    fn panics_become_errors_with_seed() {
        let plan = SeedPlan::new(1);
        let bad_seed = plan.derive_seed(5);
        let task = move |sim: &mut dyn Simulator, seed: u64| {
            if seed == bad_seed {
                panic!("boom");
            }
            draw(sim, seed)
        };
        let mut p = pool(3);
        match p.run(&plan, 0, 10, &task) {
            Err(SimError::ReplicationFailed { seed, source }) => {
                assert_eq!(seed, bad_seed);
                assert!(source.to_string().contains("boom"));
            }
            other => panic!("{other:?}"),
        }
        assert!(p.run(&plan, 10, 10, &task).is_ok());
    }
}
