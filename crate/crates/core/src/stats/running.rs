use serde::{Deserialize, Serialize};

use super::StatsError;

/// Streaming count / mean / variance accumulator (Welford), mergeable with
/// the pairwise update of Chan et al.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct RunningStats {
    n: u64,
    mean: f64,
    m2: f64,
}

impl RunningStats {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_slice(xs: &[f64]) -> Result<Self, StatsError> {
        let mut s = Self::new();
        for &x in xs {
            s.push(x)?;
        }
        Ok(s)
    }

    /// Adds one observation. NaN is rejected.
    pub fn push(&mut self, x: f64) -> Result<(), StatsError> {
        if x.is_nan() {
            return Err(StatsError::Domain("NaN observation".into()));
        }
        self.n += 1;
        let delta = x - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (x - self.mean);
        if self.m2 < 0.0 {
            self.m2 = 0.0;
        }
        Ok(())
    }

    /// Functional form of [`push`](Self::push).
    pub fn update(mut self, x: f64) -> Result<Self, StatsError> {
        self.push(x)?;
        Ok(self)
    }

    pub fn merge(&self, other: &RunningStats) -> RunningStats {
        if self.n == 0 {
            return *other;
        }
        if other.n == 0 {
            return *self;
        }
        let n = self.n + other.n;
        let (na, nb) = (self.n as f64, other.n as f64);
        let delta = other.mean - self.mean;
        let mean = self.mean + delta * nb / n as f64;
        let m2 = self.m2 + other.m2 + delta * delta * na * nb / n as f64;
        RunningStats { n, mean, m2 }
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Unbiased sample variance; 0 for n <= 1.
    pub fn variance(&self) -> f64 {
        if self.n <= 1 {
            0.0
        } else {
            self.m2 / (self.n - 1) as f64
        }
    }

    pub fn m2(&self) -> f64 {
        self.m2
    }
}
