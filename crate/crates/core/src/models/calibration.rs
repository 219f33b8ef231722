//! Toy simulators with analytically known laws, used as test oracles.

use serde::{Deserialize, Serialize};

use crate::rng::Xoshiro256;
use crate::sim::{ObservableId, Probe, SimError, Simulator};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "camelCase")]
pub enum CalibrationKind {
    /// `x_t ~ N(mu, sigma2)` independently for every step (including t = 0).
    IidNormal { mu: f64, sigma2: f64 },
    /// `x_t = mu + phi (x_{t-1} - mu) + e_t`, `e_t ~ N(0, sigma2)`.
    Ar1 { phi: f64, mu: f64, sigma2: f64, x0: f64 },
    /// `x_t = value` forever.
    Constant { value: f64 },
    /// `x_t = t`.
    Counter,
}

impl CalibrationKind {
    pub fn validate(&self) -> Result<(), SimError> {
        match *self {
            CalibrationKind::IidNormal { mu, sigma2 } => {
                if !(sigma2 > 0.0 && sigma2.is_finite() && mu.is_finite()) {
                    return Err(SimError::Config(format!("iidNormal needs sigma2 > 0, got {sigma2}")));
                }
            }
            CalibrationKind::Ar1 { phi, mu, sigma2, x0 } => {
                if !(phi.abs() < 1.0) {
                    return Err(SimError::Config(format!("ar1 needs |phi| < 1, got {phi}")));
                }
                if !(sigma2 > 0.0 && sigma2.is_finite() && mu.is_finite() && x0.is_finite()) {
                    return Err(SimError::Config(format!("ar1 needs sigma2 > 0, got {sigma2}")));
                }
            }
            CalibrationKind::Constant { value } => {
                if !value.is_finite() {
                    return Err(SimError::Config("constant must be finite".into()));
                }
            }
            CalibrationKind::Counter => {}
        }
        Ok(())
    }

    /// Stationary mean of `x`, where one exists.
    pub fn stationary_mean(&self) -> Option<f64> {
        match *self {
            CalibrationKind::IidNormal { mu, .. } | CalibrationKind::Ar1 { mu, .. } => Some(mu),
            CalibrationKind::Constant { value } => Some(value),
            CalibrationKind::Counter => None,
        }
    }

    /// Stationary variance of `x`, where one exists.
    pub fn stationary_variance(&self) -> Option<f64> {
        match *self {
            CalibrationKind::IidNormal { sigma2, .. } => Some(sigma2),
            CalibrationKind::Ar1 { phi, sigma2, .. } => Some(sigma2 / (1.0 - phi * phi)),
            CalibrationKind::Constant { .. } => Some(0.0),
            CalibrationKind::Counter => None,
        }
    }
}

const X: usize = 0;
const STEPS: usize = 1;

pub struct CalibrationSim {
    kind: CalibrationKind,
    rng: Xoshiro256,
    x: f64,
    steps: u64,
}

impl CalibrationSim {
    pub fn new(kind: CalibrationKind) -> Result<Self, SimError> {
        kind.validate()?;
        let mut sim = CalibrationSim { kind, rng: Xoshiro256::seed_from_u64(0), x: 0.0, steps: 0 };
        sim.reset(0)?;
        Ok(sim)
    }

    pub fn kind(&self) -> CalibrationKind {
        self.kind
    }

    fn draw(&mut self) -> f64 {
        match self.kind {
            CalibrationKind::IidNormal { mu, sigma2 } => mu + sigma2.sqrt() * self.rng.standard_normal(),
            CalibrationKind::Ar1 { phi, mu, sigma2, .. } => {
                mu + phi * (self.x - mu) + sigma2.sqrt() * self.rng.standard_normal()
            }
            CalibrationKind::Constant { value } => value,
            CalibrationKind::Counter => self.steps as f64,
        }
    }
}

/// `iidNormal(mu, sigma2)` or `ar1(phi, mu, sigma2)` as a boxed handle.
pub fn make_calibration_sim(kind: CalibrationKind) -> Result<Box<dyn Simulator>, SimError> {
    Ok(Box::new(CalibrationSim::new(kind)?))
}

impl Simulator for CalibrationSim {
    fn reset(&mut self, seed: u64) -> Result<(), SimError> {
        self.rng = Xoshiro256::seed_from_u64(seed);
        self.steps = 0;
        self.x = match self.kind {
            CalibrationKind::Ar1 { x0, .. } => x0,
            _ => 0.0,
        };
        self.x = match self.kind {
            CalibrationKind::Ar1 { .. } => self.x,
            _ => self.draw(),
        };
        Ok(())
    }

    fn next(&mut self) -> Result<(), SimError> {
        self.steps += 1;
        self.x = self.draw();
        Ok(())
    }

    fn resolve(&mut self, obs: &ObservableId) -> Result<Probe, SimError> {
        match obs.as_str() {
            "x" => Ok(Probe(X)),
            "steps" => Ok(Probe(STEPS)),
            other => Err(SimError::UnknownObservable(other.to_string())),
        }
    }

    fn read(&mut self, probe: Probe) -> Result<f64, SimError> {
        match probe.0 {
            X => Ok(self.x),
            STEPS => Ok(self.steps as f64),
            i => Err(SimError::UnknownObservable(format!("probe #{i}"))),
        }
    }

    fn step_count(&self) -> u64 {
        self.steps
    }
}
