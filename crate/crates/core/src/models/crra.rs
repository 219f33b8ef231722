//! Two-agent binary market with CRRA bettors and a noisy price reporter.
//!
//! Agent 1 (the lower belief) and agent 2 bet fractions `alpha1 = (1 - b1) p`
//! and `alpha2 = (1 - b2) p + b2` of their wealth on the event, where `b1`, `b2`
//! are the utility-maximizing tilts. The price clears unit contract supply.
//! The reporter publishes `p + v` where `v_t = theta v_{t-1} + u_t` and
//! `u_t ~ Uniform(-eta, eta)`.

use serde::{Deserialize, Serialize};

use crate::rng::Xoshiro256;
use crate::sim::{ObservableId, Probe, SimError, Simulator};

const EDGE: f64 = 1e-12;
const SOLVER_TOL: f64 = 1e-12;
const SOLVER_MAX_ITER: usize = 200;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrraMarketConfig {
    pub beliefs: [f64; 2],
    pub risk_aversion: [f64; 2],
    pub initial_wealth: [f64; 2],
    pub pi_star: f64,
    pub noise_eta: f64,
    pub noise_theta: f64,
}

/// The three reference parameterizations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CrraScenario {
    IidNoise,
    ArNoise,
    Ergodic,
}

impl std::str::FromStr for CrraScenario {
    type Err = SimError;
    fn from_str(s: &str) -> Result<Self, SimError> {
        match s {
            "iid" | "iid-noise" => Ok(CrraScenario::IidNoise),
            "ar" | "ar-noise" => Ok(CrraScenario::ArNoise),
            "ergodic" => Ok(CrraScenario::Ergodic),
            other => Err(SimError::Config(format!(
                "unknown CRRA scenario '{other}' (expected iid, ar or ergodic)"
            ))),
        }
    }
}

impl CrraMarketConfig {
    pub fn scenario(s: CrraScenario) -> Self {
        let base = CrraMarketConfig {
            beliefs: [0.2, 0.5],
            risk_aversion: [2.0, 0.5],
            initial_wealth: [0.5, 0.5],
            pi_star: 0.45,
            noise_eta: 0.5,
            noise_theta: 0.0,
        };
        match s {
            CrraScenario::IidNoise => base,
            CrraScenario::ArNoise => CrraMarketConfig { noise_theta: 0.9, ..base },
            CrraScenario::Ergodic => CrraMarketConfig {
                beliefs: [0.2, 0.8],
                risk_aversion: [2.0, 2.0],
                noise_theta: 0.9,
                ..base
            },
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: String| Err(SimError::Config(m));
        let [p1, p2] = self.beliefs;
        if !(p1 > 0.0 && p2 < 1.0 && p1 < p2) {
            return bad(format!("beliefs ({p1}, {p2}) must satisfy 0 < pi1 < pi2 < 1"));
        }
        if self.risk_aversion.iter().any(|&g| !(g > 0.0 && g.is_finite())) {
            return bad("risk aversion must be positive".into());
        }
        if self.initial_wealth.iter().any(|&w| !(w >= 0.0)) {
            return bad("negative initial wealth".into());
        }
        let total = self.initial_wealth[0] + self.initial_wealth[1];
        if (total - 1.0).abs() > 1e-12 {
            return bad(format!("initial wealth sums to {total}, expected 1"));
        }
        if !(self.pi_star > 0.0 && self.pi_star < 1.0) {
            return bad(format!("piStar = {} outside (0, 1)", self.pi_star));
        }
        if !(self.noise_eta > 0.0 && self.noise_eta.is_finite()) {
            return bad(format!("eta = {} must be positive", self.noise_eta));
        }
        if !(self.noise_theta.abs() < 1.0) {
            return bad(format!("|theta| = {} must be below 1", self.noise_theta.abs()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrraMarketState {
    pub wealth: [f64; 2],
    pub true_price: f64,
    pub noise: f64,
    pub reported_price: f64,
    pub last_outcome: Option<bool>,
}

/// Tilt of the low-belief agent; zero when `p == pi`.
pub fn tilt_low(pi: f64, gamma: f64, p: f64) -> f64 {
    let g = 1.0 / gamma;
    let a = (p * (1.0 - pi)).powf(g);
    let b = (pi * (1.0 - p)).powf(g);
    let d = a + p * pi.powf(g) * (1.0 - p).powf((1.0 - gamma) * g);
    (a - b) / d
}

/// Tilt of the high-belief agent; zero when `p == pi`.
pub fn tilt_high(pi: f64, gamma: f64, p: f64) -> f64 {
    let g = 1.0 / gamma;
    let a = (pi * (1.0 - p)).powf(g);
    let b = (p * (1.0 - pi)).powf(g);
    let d = a + (1.0 - p) * (1.0 - pi).powf(g) * p.powf((1.0 - gamma) * g);
    (a - b) / d
}

/// Fractions of wealth each agent stakes on the event at price `p`.
pub fn bets(config: &CrraMarketConfig, p: f64) -> [f64; 2] {
    let b1 = tilt_low(config.beliefs[0], config.risk_aversion[0], p);
    let b2 = tilt_high(config.beliefs[1], config.risk_aversion[1], p);
    [(1.0 - b1) * p, (1.0 - b2) * p + b2]
}

/// Aggregate stake minus contract supply, `sum_i alpha_i w_i - p`.
pub fn excess_demand(config: &CrraMarketConfig, wealth: [f64; 2], p: f64) -> f64 {
    let b1 = tilt_low(config.beliefs[0], config.risk_aversion[0], p);
    let b2 = tilt_high(config.beliefs[1], config.risk_aversion[1], p);
    -wealth[0] * b1 * p + wealth[1] * b2 * (1.0 - p)
}

/// Market-clearing price on `[pi1 + 1e-12, pi2 - 1e-12]`.
///
/// Excess demand is decreasing on the interval; if it does not change sign
/// the nearer endpoint is returned (one agent holds essentially all wealth).
/// Root finding is regula falsi with the Illinois correction, which keeps the
/// bracket and converges superlinearly.
pub fn clearing_price(config: &CrraMarketConfig, wealth: [f64; 2]) -> Result<f64, SimError> {
    let f = |p: f64| excess_demand(config, wealth, p);
    let (mut a, mut b) = (config.beliefs[0] + EDGE, config.beliefs[1] - EDGE);
    let (mut fa, mut fb) = (f(a), f(b));
    if !(fa.is_finite() && fb.is_finite()) {
        return Err(SimError::Model(format!(
            "non-finite excess demand at wealth {wealth:?}"
        )));
    }
    if fa <= 0.0 {
        return Ok(a);
    }
    if fb >= 0.0 {
        return Ok(b);
    }
    let mut side = 0i8;
    for _ in 0..SOLVER_MAX_ITER {
        let x = (a * fb - b * fa) / (fb - fa);
        let x = if x > a && x < b { x } else { 0.5 * (a + b) };
        let fx = f(x);
        if fx == 0.0 {
            return Ok(x);
        }
        if fx > 0.0 {
            a = x;
            fa = fx;
            if side == 1 {
                fb *= 0.5;
            }
            side = 1;
        } else {
            b = x;
            fb = fx;
            if side == -1 {
                fa *= 0.5;
            }
            side = -1;
        }
        if b - a <= SOLVER_TOL {
            return Ok(0.5 * (a + b));
        }
    }
    Err(SimError::Model(format!(
        "clearing price did not converge in {SOLVER_MAX_ITER} iterations \
         (wealth {wealth:?}, bracket [{a}, {b}])"
    )))
}

impl CrraMarketState {
    pub fn initial(config: &CrraMarketConfig) -> Result<Self, SimError> {
        let p = clearing_price(config, config.initial_wealth)?;
        Ok(CrraMarketState {
            wealth: config.initial_wealth,
            true_price: p,
            noise: 0.0,
            reported_price: p,
            last_outcome: None,
        })
    }

    /// One round in place: clear, settle on `draws.0 < pi_star`, then advance
    /// the reporter noise using `draws.1`.
    pub fn advance(&mut self, config: &CrraMarketConfig, draws: (f64, f64)) -> Result<(), SimError> {
        let p = clearing_price(config, self.wealth)?;
        let alpha = bets(config, p);
        let event = draws.0 < config.pi_star;
        let mut w = self.wealth;
        for i in 0..2 {
            w[i] *= if event { alpha[i] / p } else { (1.0 - alpha[i]) / (1.0 - p) };
        }
        let total = w[0] + w[1];
        if !(total.is_finite() && total > 0.0) {
            return Err(SimError::Model(format!("wealth degenerated to {w:?}")));
        }
        // Clearing is exact only to solver tolerance; renormalize so the
        // conservation error does not accumulate.
        self.wealth = [w[0] / total, w[1] / total];
        let u = config.noise_eta * (2.0 * draws.1 - 1.0);
        self.noise = config.noise_theta * self.noise + u;
        self.true_price = p;
        self.reported_price = p + self.noise;
        self.last_outcome = Some(event);
        Ok(())
    }
}

/// Pure form of one round.
pub fn crra_step(
    state: &CrraMarketState,
    config: &CrraMarketConfig,
    draws: (f64, f64),
) -> Result<CrraMarketState, SimError> {
    let mut next = state.clone();
    next.advance(config, draws)?;
    Ok(next)
}

const TRUE_PRICE: usize = 100;
const REPORTED: usize = 101;
const NOISE: usize = 102;
const STEPS: usize = 103;
const OUTCOME: usize = 104;

pub struct CrraMarket {
    config: CrraMarketConfig,
    state: CrraMarketState,
    rng: Xoshiro256,
    steps: u64,
}

impl CrraMarket {
    pub fn new(config: CrraMarketConfig) -> Result<Self, SimError> {
        config.validate()?;
        let state = CrraMarketState::initial(&config)?;
        Ok(CrraMarket { config, state, rng: Xoshiro256::seed_from_u64(0), steps: 0 })
    }

    pub fn state(&self) -> &CrraMarketState {
        &self.state
    }
}

impl Simulator for CrraMarket {
    fn reset(&mut self, seed: u64) -> Result<(), SimError> {
        self.state = CrraMarketState::initial(&self.config)?;
        self.rng = Xoshiro256::seed_from_u64(seed);
        self.steps = 0;
        Ok(())
    }

    fn next(&mut self) -> Result<(), SimError> {
        let d0 = self.rng.uniform();
        let d1 = self.rng.uniform();
        self.state.advance(&self.config, (d0, d1))?;
        self.steps += 1;
        Ok(())
    }

    fn resolve(&mut self, obs: &ObservableId) -> Result<Probe, SimError> {
        match obs.as_str() {
            "price" | "truePrice" => Ok(Probe(TRUE_PRICE)),
            "reportedPrice" => Ok(Probe(REPORTED)),
            "noise" => Ok(Probe(NOISE)),
            "steps" => Ok(Probe(STEPS)),
            "outcome" => Ok(Probe(OUTCOME)),
            name => match super::kelly::agent_index(name) {
                Some(i) if i < 2 => Ok(Probe(i)),
                _ => Err(SimError::UnknownObservable(name.to_string())),
            },
        }
    }

    fn read(&mut self, probe: Probe) -> Result<f64, SimError> {
        Ok(match probe.0 {
            0 | 1 => self.state.wealth[probe.0],
            TRUE_PRICE => self.state.true_price,
            REPORTED => self.state.reported_price,
            NOISE => self.state.noise,
            STEPS => self.steps as f64,
            OUTCOME => match self.state.last_outcome {
                Some(true) => 1.0,
                Some(false) => 0.0,
                None => f64::NAN,
            },
            i => return Err(SimError::UnknownObservable(format!("probe #{i}"))),
        })
    }

    fn step_count(&self) -> u64 {
        self.steps
    }
}
