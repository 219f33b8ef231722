use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::EngineError;
use crate::models::ModelSpec;
use crate::query::CommandKind;
use crate::sim::ObservableId;
use crate::stats::DeltaMode;
use crate::steady::{SteadyMethod, SteadyParams, WarmupParams, DEFAULT_MAX_STEPS};
use crate::transient::{StopRule, DEFAULT_BLOCK_SIZE};

/// A built-in model name (or `cmd:`/`tcp:` external spec) with parameters.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelChoice {
    pub name: String,
    pub params: Vec<(String, String)>,
}

impl ModelChoice {
    pub fn new(name: impl Into<String>) -> Self {
        ModelChoice { name: name.into(), params: Vec::new() }
    }

    pub fn with(mut self, key: &str, value: impl ToString) -> Self {
        self.params.push((key.to_string(), value.to_string()));
        self
    }

    pub fn spec(&self) -> Result<ModelSpec, EngineError> {
        ModelSpec::parse(&self.name, &self.params).map_err(|e| EngineError::Config(e.to_string()))
    }
}

/// The analysis a job performs. Empty observable lists mean the model's
/// default observables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "camelCase")]
pub enum AnalysisRequest {
    Transient {
        observables: Vec<String>,
        times: Vec<u64>,
    },
    #[serde(rename_all = "camelCase")]
    Steady {
        method: SteadyMethod,
        observables: Vec<String>,
        /// Fixed warmup for the manual methods.
        warmup: Option<u64>,
        /// Replication horizon for manualRD.
        horizon: Option<u64>,
        /// manualRD: also report the 5th/95th percentile band.
        percentiles: bool,
    },
    Warmup {
        observables: Vec<String>,
    },
    Ergodicity {
        observables: Vec<String>,
    },
    /// A query program, stored verbatim so a manifest is self-contained.
    Query {
        source: String,
        command: Option<CommandKind>,
    },
    /// Welch comparison of two transient CSV files.
    Compare {
        a: String,
        b: String,
    },
}

impl AnalysisRequest {
    pub fn name(&self) -> &'static str {
        match self {
            AnalysisRequest::Transient { .. } => "transient",
            AnalysisRequest::Steady { .. } => "steady",
            AnalysisRequest::Warmup { .. } => "warmup",
            AnalysisRequest::Ergodicity { .. } => "ergodicity",
            AnalysisRequest::Query { .. } => "query",
            AnalysisRequest::Compare { .. } => "compare",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct EngineConfig {
    /// Absent only for `compare`, which needs no simulator.
    pub model: Option<ModelChoice>,
    pub analysis: AnalysisRequest,
    pub alpha: f64,
    pub delta: f64,
    pub delta_mode: DeltaMode,
    pub block_size: u64,
    pub max_sims: Option<u64>,
    /// Welch significance; defaults to `alpha`.
    pub a_w: Option<f64>,
    /// Welch effect size; defaults to `delta`.
    pub epsilon: Option<f64>,
    pub parallelism: usize,
    pub seed: u64,
    pub max_steps: u64,
    pub warmup: WarmupParams,
    pub horizon_multiplier: u64,
    pub unfold_budget: u64,
}

impl EngineConfig {
    pub fn new(model: Option<ModelChoice>, analysis: AnalysisRequest) -> Self {
        let rule = StopRule::default();
        EngineConfig {
            model,
            analysis,
            alpha: rule.alpha,
            delta: rule.delta,
            delta_mode: rule.delta_mode,
            block_size: DEFAULT_BLOCK_SIZE,
            max_sims: None,
            a_w: None,
            epsilon: None,
            parallelism: 1,
            seed: 0,
            max_steps: DEFAULT_MAX_STEPS,
            warmup: WarmupParams::default(),
            horizon_multiplier: 2,
            unfold_budget: crate::query::DEFAULT_UNFOLD_BUDGET,
        }
    }

    pub fn rule(&self) -> StopRule {
        StopRule {
            alpha: self.alpha,
            delta: self.delta,
            delta_mode: self.delta_mode,
            block_size: self.block_size,
            max_sims: self.max_sims,
        }
    }

    pub fn steady_params(&self) -> SteadyParams {
        SteadyParams {
            warmup: self.warmup,
            rule: self.rule(),
            horizon_multiplier: self.horizon_multiplier,
            max_steps: self.max_steps,
        }
    }

    pub fn a_w(&self) -> f64 {
        self.a_w.unwrap_or(self.alpha)
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon.unwrap_or(self.delta)
    }

    /// Checks everything that can be checked without running the model.
    pub fn validate(&self) -> Result<(), EngineError> {
        let bad = |m: String| Err(EngineError::Config(m));
        if self.parallelism < 1 {
            return bad("parallelism must be at least 1".into());
        }
        if self.max_steps < 1 {
            return bad("maxSteps must be positive".into());
        }
        if self.unfold_budget < 1 {
            return bad("unfolding budget must be positive".into());
        }
        if self.max_sims == Some(0) {
            return bad("maxSims must be positive".into());
        }
        self.rule().validate().map_err(|e| EngineError::Config(e.to_string()))?;
        let a_w = self.a_w();
        if !(a_w > 0.0 && a_w < 1.0) {
            return bad(format!("aW {a_w} outside (0, 1)"));
        }
        if !(self.epsilon() > 0.0) {
            return bad(format!("epsilon {} must be positive", self.epsilon()));
        }
        match (&self.analysis, &self.model) {
            (AnalysisRequest::Compare { a, b }, _) => {
                for p in [a, b] {
                    if !std::path::Path::new(p).is_file() {
                        return bad(format!("comparison input {p} does not exist"));
                    }
                }
            }
            (_, None) => return bad(format!("{} needs a model", self.analysis.name())),
            (_, Some(m)) => {
                m.spec()?;
            }
        }
        match &self.analysis {
            AnalysisRequest::Transient { times, .. } if times.is_empty() => bad("no time points given".into()),
            AnalysisRequest::Steady { method: SteadyMethod::ManualRd, warmup, horizon, .. } => match (warmup, horizon) {
                (Some(w), Some(m)) if w < m => Ok(()),
                (Some(_), Some(_)) => bad("manualRD needs warmup below horizon".into()),
                _ => bad("manualRD needs --warmup and --horizon".into()),
            },
            AnalysisRequest::Steady { method: SteadyMethod::ManualBm, warmup: None, .. } => {
                bad("manualBM needs --warmup".into())
            }
            AnalysisRequest::Steady { method, .. } if !method.is_rd() || *method == SteadyMethod::AutoRd => {
                self.steady_params().validate().map_err(|e| EngineError::Config(e.to_string()))
            }
            AnalysisRequest::Warmup { .. } | AnalysisRequest::Ergodicity { .. } => {
                self.steady_params().validate().map_err(|e| EngineError::Config(e.to_string()))
            }
            _ => Ok(()),
        }
    }

    /// SHA-256 of the canonical JSON encoding.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Parses observable names, reporting the first invalid one.
pub(crate) fn observable_ids(names: &[String]) -> Result<Vec<ObservableId>, EngineError> {
    names
        .iter()
        .map(|n| ObservableId::new(n.clone()).map_err(|e| EngineError::Config(e.to_string())))
        .collect()
}

/// Expands `key=a:step:b` into the key and its values, rendered compactly.
pub fn sweep_values(spec: &str) -> Result<(String, Vec<String>), EngineError> {
    let bad = || EngineError::Config(format!("sweep `{spec}` is not of the form key=from:step:to"));
    let (key, range) = spec.split_once('=').ok_or_else(bad)?;
    let parts: Vec<f64> =
        range.split(':').map(|p| p.trim().parse::<f64>()).collect::<Result<_, _>>().map_err(|_| bad())?;
    let [from, step, to] = parts[..] else { return Err(bad()) };
    if !(step > 0.0) || !from.is_finite() || !to.is_finite() || from > to {
        return Err(EngineError::Config(format!("sweep `{spec}` needs a positive step and from <= to")));
    }
    let count = ((to - from) / step + 1e-9).floor() as u64 + 1;
    if count > 100_000 {
        return Err(EngineError::Config(format!("sweep `{spec}` has {count} points")));
    }
    let values = (0..count)
        .map(|i| {
            let v = from + i as f64 * step;
            // Strip accumulated binary noise such as 0.30000000000000004.
            let v = format!("{v:.12}").parse::<f64>().expect("formatted float");
            format!("{v}")
        })
        .collect();
    Ok((key.trim().to_string(), values))
}
