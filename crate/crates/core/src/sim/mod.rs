//! The three-verb simulator abstraction (reset / next / eval) and helpers for
//! driving single trajectories.

mod external;
mod protocol;

pub use external::{ExternalSimSpec, ExternalSimulator, DEFAULT_HANDSHAKE_TIMEOUT};
pub use protocol::serve;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ObservableId(String);

impl ObservableId {
    pub fn new(name: impl Into<String>) -> Result<Self, SimError> {
        let name = name.into();
        if name.is_empty() || name.chars().any(char::is_whitespace) {
            return Err(SimError::InvalidObservable(name));
        }
        Ok(ObservableId(name))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl std::fmt::Display for ObservableId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::str::FromStr for ObservableId {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ObservableId::new(s)
    }
}

/// Pre-resolved handle to an observable of one simulator instance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Probe(pub usize);

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("unknown observable `{0}`")]
    UnknownObservable(String),
    #[error("invalid observable name `{0}`")]
    InvalidObservable(String),
    #[error("protocol violation: {reason} (line: {line:?})")]
    Protocol { line: String, reason: String },
    #[error("failed to launch simulator: {0}")]
    Launch(String),
    #[error("simulator did not answer within {0:?}")]
    Timeout(std::time::Duration),
    #[error("simulator I/O error: {0}")]
    Io(String),
    #[error("simulator fault: {0}")]
    Fault(String),
    #[error("model error: {0}")]
    Model(String),
    #[error("invalid model configuration: {0}")]
    Config(String),
    #[error("replication with seed {seed} failed: {source}")]
    ReplicationFailed {
        seed: u64,
        #[source]
        source: Box<SimError>,
    },
}

impl SimError {
    pub fn with_seed(self, seed: u64) -> SimError {
        match self {
            e @ SimError::ReplicationFailed { .. } => e,
            e => SimError::ReplicationFailed { seed, source: Box::new(e) },
        }
    }
}

/// Control surface over one stochastic trajectory.
///
/// A handle is single-threaded; the engine creates one per worker.
pub trait Simulator: Send {
    /// Returns to the initial state and reseeds the generator.
    fn reset(&mut self, seed: u64) -> Result<(), SimError>;

    /// Performs one step; increments [`step_count`](Self::step_count).
    fn next(&mut self) -> Result<(), SimError>;

    fn resolve(&mut self, obs: &ObservableId) -> Result<Probe, SimError>;

    fn read(&mut self, probe: Probe) -> Result<f64, SimError>;

    /// Steps since the last reset.
    fn step_count(&self) -> u64;

    fn eval(&mut self, obs: &ObservableId) -> Result<f64, SimError> {
        let probe = self.resolve(obs)?;
        self.read(probe)
    }
}

impl<S: Simulator + ?Sized> Simulator for Box<S> {
    fn reset(&mut self, seed: u64) -> Result<(), SimError> {
        (**self).reset(seed)
    }
    fn next(&mut self) -> Result<(), SimError> {
        (**self).next()
    }
    fn resolve(&mut self, obs: &ObservableId) -> Result<Probe, SimError> {
        (**self).resolve(obs)
    }
    fn read(&mut self, probe: Probe) -> Result<f64, SimError> {
        (**self).read(probe)
    }
    fn step_count(&self) -> u64 {
        (**self).step_count()
    }
    fn eval(&mut self, obs: &ObservableId) -> Result<f64, SimError> {
        (**self).eval(obs)
    }
}

/// Resets with `seed`, steps to `horizon` and records every observable at
/// each sample time. Rows follow `sample_times`, columns follow `observables`.
pub fn run_trajectory(
    sim: &mut dyn Simulator,
    seed: u64,
    horizon: u64,
    observables: &[ObservableId],
    sample_times: &[u64],
) -> Result<Vec<Vec<f64>>, SimError> {
    if sample_times.windows(2).any(|w| w[0] > w[1]) {
        return Err(SimError::Config("sample times must be sorted ascending".into()));
    }
    if sample_times.last().is_some_and(|&t| t > horizon) {
        return Err(SimError::Config("sample time beyond horizon".into()));
    }
    let mut run = || -> Result<Vec<Vec<f64>>, SimError> {
        sim.reset(seed)?;
        let probes = observables
            .iter()
            .map(|o| sim.resolve(o))
            .collect::<Result<Vec<_>, _>>()?;
        let mut rows = Vec::with_capacity(sample_times.len());
        let mut t = 0u64;
        for &target in sample_times {
            while t < target {
                sim.next()?;
                t += 1;
            }
            rows.push(probes.iter().map(|&p| sim.read(p)).collect::<Result<Vec<_>, _>>()?);
        }
        while t < horizon {
            sim.next()?;
            t += 1;
        }
        Ok(rows)
    };
    run().map_err(|e| match e {
        e @ (SimError::UnknownObservable(_) | SimError::Config(_)) => e,
        e => e.with_seed(seed),
    })
}

/// Wraps a simulator and counts `next` calls; used by tests that meter the
/// query evaluator.
pub struct Metered<S> {
    pub inner: S,
    pub next_calls: u64,
}

impl<S> Metered<S> {
    pub fn new(inner: S) -> Self {
        Metered { inner, next_calls: 0 }
    }
}

impl<S: Simulator> Simulator for Metered<S> {
    fn reset(&mut self, seed: u64) -> Result<(), SimError> {
        self.inner.reset(seed)
    }
    fn next(&mut self) -> Result<(), SimError> {
        self.next_calls += 1;
        self.inner.next()
    }
    fn resolve(&mut self, obs: &ObservableId) -> Result<Probe, SimError> {
        self.inner.resolve(obs)
    }
    fn read(&mut self, probe: Probe) -> Result<f64, SimError> {
        self.inner.read(probe)
    }
    fn step_count(&self) -> u64 {
        self.inner.step_count()
    }
}
