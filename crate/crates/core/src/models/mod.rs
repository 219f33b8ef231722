//! Built-in reference simulators and the name/parameter registry that
//! instantiates them.

mod calibration;
mod crra;
mod kelly;

pub use calibration::{make_calibration_sim, CalibrationKind, CalibrationSim};
pub use crra::{
    bets as crra_bets, clearing_price as crra_clearing_price, crra_step, excess_demand,
    tilt_high, tilt_low, CrraMarket, CrraMarketConfig, CrraMarketState, CrraScenario,
};
pub use kelly::{
    clearing_price as kelly_clearing_price, kelly_fraction, kelly_step, KellyMarket,
    KellyMarketConfig, KellyMarketState,
};

use std::collections::BTreeMap;

use crate::sim::{ExternalSimSpec, ObservableId, SimError, Simulator};

/// A fully parameterized model that can mint independent simulator handles.
#[derive(Debug, Clone, PartialEq)]
pub enum ModelSpec {
    Kelly(KellyMarketConfig),
    Crra(CrraMarketConfig),
    Calibration(CalibrationKind),
    External(ExternalSimSpec),
}

struct Params {
    model: String,
    map: BTreeMap<String, String>,
}

impl Params {
    fn new(model: &str, params: &[(String, String)]) -> Result<Self, SimError> {
        let mut map = BTreeMap::new();
        for (k, v) in params {
            if map.insert(k.clone(), v.clone()).is_some() {
                return Err(SimError::Config(format!("parameter '{k}' given twice")));
            }
        }
        Ok(Params { model: model.to_string(), map })
    }

    fn take_f64(&mut self, key: &str) -> Result<Option<f64>, SimError> {
        self.map
            .remove(key)
            .map(|v| {
                v.trim().parse::<f64>().map_err(|_| {
                    SimError::Config(format!("{}: parameter {key}='{v}' is not a number", self.model))
                })
            })
            .transpose()
    }

    fn take_list(&mut self, key: &str) -> Result<Option<Vec<f64>>, SimError> {
        self.map
            .remove(key)
            .map(|v| {
                v.split(',')
                    .map(|s| s.trim().parse::<f64>())
                    .collect::<Result<Vec<_>, _>>()
                    .map_err(|_| {
                        SimError::Config(format!(
                            "{}: parameter {key}='{v}' is not a comma-separated number list",
                            self.model
                        ))
                    })
            })
            .transpose()
    }

    fn take_pair(&mut self, key: &str) -> Result<Option<[f64; 2]>, SimError> {
        match self.take_list(key)? {
            None => Ok(None),
            Some(v) if v.len() == 2 => Ok(Some([v[0], v[1]])),
            Some(v) => Err(SimError::Config(format!(
                "{}: parameter {key} needs two values, got {}",
                self.model,
                v.len()
            ))),
        }
    }

    fn finish(self) -> Result<(), SimError> {
        match self.map.keys().next() {
            None => Ok(()),
            Some(k) => Err(SimError::Config(format!("{}: unknown parameter '{k}'", self.model))),
        }
    }
}

/// Default event probability for the Kelly market when `piStar` is omitted.
pub const KELLY_DEFAULT_PI_STAR: f64 = 0.6;

impl ModelSpec {
    /// Model names: `kelly`, `crra`, `iidNormal`, `ar1`, `constant`, `counter`,
    /// or an external simulator as `cmd:<program> [args]` / `tcp:<host:port>`.
    pub fn parse(name: &str, params: &[(String, String)]) -> Result<Self, SimError> {
        if name.starts_with("cmd:") || name.starts_with("tcp:") {
            if !params.is_empty() {
                return Err(SimError::Config(
                    "external simulators take no --model-param; configure the process itself".into(),
                ));
            }
            return Ok(ModelSpec::External(ExternalSimSpec::parse(name)?));
        }
        let mut p = Params::new(name, params)?;
        let spec = match name {
            "kelly" => {
                let pi_star = p.take_f64("piStar")?.unwrap_or(KELLY_DEFAULT_PI_STAR);
                let mut cfg = KellyMarketConfig::reference(pi_star);
                if let Some(c) = p.take_f64("c")? {
                    cfg.c = c;
                }
                if let Some(b) = p.take_list("beliefs")? {
                    cfg.beliefs = b;
                }
                if let Some(w) = p.take_list("wealth")? {
                    cfg.initial_wealth = w;
                }
                cfg.validate()?;
                ModelSpec::Kelly(cfg)
            }
            "crra" => {
                let scenario = match p.map.remove("scenario") {
                    Some(s) => s.parse::<CrraScenario>()?,
                    None => CrraScenario::IidNoise,
                };
                let mut cfg = CrraMarketConfig::scenario(scenario);
                if let Some(v) = p.take_pair("beliefs")? {
                    cfg.beliefs = v;
                }
                if let Some(v) = p.take_pair("gamma")? {
                    cfg.risk_aversion = v;
                }
                if let Some(v) = p.take_pair("wealth")? {
                    cfg.initial_wealth = v;
                }
                if let Some(v) = p.take_f64("piStar")? {
                    cfg.pi_star = v;
                }
                if let Some(v) = p.take_f64("eta")? {
                    cfg.noise_eta = v;
                }
                if let Some(v) = p.take_f64("theta")? {
                    cfg.noise_theta = v;
                }
                cfg.validate()?;
                ModelSpec::Crra(cfg)
            }
            "iidNormal" => {
                let kind = CalibrationKind::IidNormal {
                    mu: p.take_f64("mu")?.unwrap_or(0.0),
                    sigma2: p.take_f64("sigma2")?.unwrap_or(1.0),
                };
                kind.validate()?;
                ModelSpec::Calibration(kind)
            }
            "ar1" => {
                let mu = p.take_f64("mu")?.unwrap_or(0.0);
                let kind = CalibrationKind::Ar1 {
                    phi: p.take_f64("phi")?.unwrap_or(0.5),
                    mu,
                    sigma2: p.take_f64("sigma2")?.unwrap_or(1.0),
                    x0: p.take_f64("x0")?.unwrap_or(0.0),
                };
                kind.validate()?;
                ModelSpec::Calibration(kind)
            }
            "constant" => {
                let kind = CalibrationKind::Constant { value: p.take_f64("value")?.unwrap_or(0.0) };
                kind.validate()?;
                ModelSpec::Calibration(kind)
            }
            "counter" => ModelSpec::Calibration(CalibrationKind::Counter),
            other => {
                return Err(SimError::Config(format!(
                    "unknown model '{other}' (expected kelly, crra, iidNormal, ar1, constant, \
                     counter, cmd:<program> or tcp:<addr>)"
                )))
            }
        };
        p.finish()?;
        Ok(spec)
    }

    /// A fresh, independent simulator handle.
    pub fn instantiate(&self) -> Result<Box<dyn Simulator>, SimError> {
        Ok(match self {
            ModelSpec::Kelly(cfg) => Box::new(KellyMarket::new(cfg.clone())?),
            ModelSpec::Crra(cfg) => Box::new(CrraMarket::new(cfg.clone())?),
            ModelSpec::Calibration(kind) => Box::new(CalibrationSim::new(*kind)?),
            ModelSpec::External(spec) => Box::new(spec.connect()?),
        })
    }

    /// Observables analysed when none are requested explicitly.
    pub fn default_observables(&self) -> Vec<ObservableId> {
        let names: Vec<String> = match self {
            ModelSpec::Kelly(cfg) => (0..cfg.n_agents())
                .map(|i| i.to_string())
                .chain(std::iter::once("price".to_string()))
                .collect(),
            ModelSpec::Crra(_) => vec!["0".into(), "1".into(), "price".into(), "reportedPrice".into()],
            ModelSpec::Calibration(_) => vec!["x".into()],
            ModelSpec::External(_) => vec!["price".into()],
        };
        names.into_iter().map(|n| ObservableId::new(n).expect("valid built-in name")).collect()
    }
}
