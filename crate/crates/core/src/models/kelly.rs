//! Repeated binary prediction market with fractional-Kelly bettors.
//!
//! Each step the clearing price is the wealth-weighted mean belief
//! `p = sum_i pi_i w_i`, the event occurs with probability `pi_star`, and each
//! agent bets the fraction `alpha_i = c pi_i + (1 - c) p` of its wealth on it.

use serde::{Deserialize, Serialize};

use crate::rng::Xoshiro256;
use crate::sim::{ObservableId, Probe, SimError, Simulator};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KellyMarketConfig {
    pub c: f64,
    pub beliefs: Vec<f64>,
    pub initial_wealth: Vec<f64>,
    pub pi_star: f64,
}

impl KellyMarketConfig {
    /// Three agents, c = 0.01, beliefs (0.3, 0.5, 0.8), wealth (0.33, 0.33, 0.34).
    pub fn reference(pi_star: f64) -> Self {
        KellyMarketConfig {
            c: 0.01,
            beliefs: vec![0.3, 0.5, 0.8],
            initial_wealth: vec![0.33, 0.33, 0.34],
            pi_star,
        }
    }

    pub fn n_agents(&self) -> usize {
        self.beliefs.len()
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: String| Err(SimError::Config(m));
        if self.beliefs.is_empty() || self.beliefs.len() != self.initial_wealth.len() {
            return bad(format!(
                "{} beliefs but {} initial wealths",
                self.beliefs.len(),
                self.initial_wealth.len()
            ));
        }
        if !(self.c > 0.0 && self.c <= 1.0) {
            return bad(format!("c = {} outside (0, 1]", self.c));
        }
        if !(self.pi_star > 0.0 && self.pi_star < 1.0) {
            return bad(format!("piStar = {} outside (0, 1)", self.pi_star));
        }
        if let Some(b) = self.beliefs.iter().find(|&&b| !(b > 0.0 && b < 1.0)) {
            return bad(format!("belief {b} outside (0, 1)"));
        }
        if self.initial_wealth.iter().any(|&w| !(w >= 0.0)) {
            return bad("negative initial wealth".into());
        }
        let total: f64 = self.initial_wealth.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return bad(format!("initial wealth sums to {total}, expected 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KellyMarketState {
    pub wealth: Vec<f64>,
    /// Price of the most recent round (before the first round: the price the
    /// initial wealth would clear at).
    pub price: f64,
    pub last_outcome: Option<bool>,
}

impl KellyMarketState {
    pub fn initial(config: &KellyMarketConfig) -> Self {
        KellyMarketState {
            wealth: config.initial_wealth.clone(),
            price: clearing_price(&config.beliefs, &config.initial_wealth),
            last_outcome: None,
        }
    }

    /// One betting round in place. `draw` is uniform on [0, 1); the event
    /// occurs iff `draw < pi_star`.
    pub fn advance(&mut self, config: &KellyMarketConfig, draw: f64) -> Result<(), SimError> {
        let p = clearing_price(&config.beliefs, &self.wealth);
        if !(p > 0.0 && p < 1.0) {
            return Err(SimError::Model(format!("degenerate clearing price {p}")));
        }
        let event = draw < config.pi_star;
        let c = config.c;
        let keep = 1.0 - c;
        if event {
            for (w, &pi) in self.wealth.iter_mut().zip(&config.beliefs) {
                *w *= keep + c * pi / p;
            }
        } else {
            for (w, &pi) in self.wealth.iter_mut().zip(&config.beliefs) {
                *w *= keep + c * (1.0 - pi) / (1.0 - p);
            }
        }
        // Pins the total at 1 so rounding drift cannot accumulate over very
        // long trajectories.
        let total: f64 = self.wealth.iter().sum();
        self.wealth.iter_mut().for_each(|w| *w /= total);
        self.price = p;
        self.last_outcome = Some(event);
        debug_assert!((self.wealth.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        Ok(())
    }
}

/// Wealth-weighted mean belief, summed in agent order. Dividing by the
/// wealth total makes the round conserve that total, so rounding error does
/// not compound (without it, a no-event round scales the error by
/// `1 - c + c / (1 - p)`).
pub fn clearing_price(beliefs: &[f64], wealth: &[f64]) -> f64 {
    let weighted: f64 = beliefs.iter().zip(wealth).map(|(pi, w)| pi * w).sum();
    weighted / wealth.iter().sum::<f64>()
}

/// Betting fraction on the event under the fractional Kelly rule.
pub fn kelly_fraction(c: f64, belief: f64, price: f64) -> f64 {
    c * belief + (1.0 - c) * price
}

/// Pure form of one round.
pub fn kelly_step(
    state: &KellyMarketState,
    config: &KellyMarketConfig,
    draw: f64,
) -> Result<KellyMarketState, SimError> {
    let mut next = state.clone();
    next.advance(config, draw)?;
    Ok(next)
}

const PRICE: usize = usize::MAX;
const STEPS: usize = usize::MAX - 1;
const OUTCOME: usize = usize::MAX - 2;

pub struct KellyMarket {
    config: KellyMarketConfig,
    state: KellyMarketState,
    rng: Xoshiro256,
    steps: u64,
}

impl KellyMarket {
    pub fn new(config: KellyMarketConfig) -> Result<Self, SimError> {
        config.validate()?;
        let state = KellyMarketState::initial(&config);
        Ok(KellyMarket { config, state, rng: Xoshiro256::seed_from_u64(0), steps: 0 })
    }

    pub fn state(&self) -> &KellyMarketState {
        &self.state
    }
}

/// Agent index from "3" or "wealth.3".
pub(crate) fn agent_index(name: &str) -> Option<usize> {
    name.strip_prefix("wealth.").unwrap_or(name).parse::<usize>().ok()
}

impl Simulator for KellyMarket {
    fn reset(&mut self, seed: u64) -> Result<(), SimError> {
        self.state = KellyMarketState::initial(&self.config);
        self.rng = Xoshiro256::seed_from_u64(seed);
        self.steps = 0;
        Ok(())
    }

    fn next(&mut self) -> Result<(), SimError> {
        let draw = self.rng.uniform();
        self.state.advance(&self.config, draw)?;
        self.steps += 1;
        Ok(())
    }

    fn resolve(&mut self, obs: &ObservableId) -> Result<Probe, SimError> {
        match obs.as_str() {
            "price" => Ok(Probe(PRICE)),
            "steps" => Ok(Probe(STEPS)),
            "outcome" => Ok(Probe(OUTCOME)),
            name => match agent_index(name) {
                Some(i) if i < self.config.n_agents() => Ok(Probe(i)),
                _ => Err(SimError::UnknownObservable(name.to_string())),
            },
        }
    }

    fn read(&mut self, probe: Probe) -> Result<f64, SimError> {
        Ok(match probe.0 {
            PRICE => self.state.price,
            STEPS => self.steps as f64,
            OUTCOME => match self.state.last_outcome {
                Some(true) => 1.0,
                Some(false) => 0.0,
                None => f64::NAN,
            },
            i => *self
                .state
                .wealth
                .get(i)
                .ok_or_else(|| SimError::UnknownObservable(format!("probe #{i}")))?,
        })
    }

    fn step_count(&self) -> u64 {
        self.steps
    }
}
