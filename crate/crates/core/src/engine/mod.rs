//! Job orchestration: configuration, execution on a worker pool, CSV and
//! manifest emission, and replay from a manifest.

mod config;
mod csv_io;

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use config::{sweep_values, AnalysisRequest, EngineConfig, ModelChoice};
pub use csv_io::{
    read_transient_csv, JobOutputs, ERGODICITY_CSV, STEADY_CSV, TRANSIENT_CSV, WARMUP_CSV, WELCH_CSV,
};

use crate::compare::compare_experiments;
use crate::ergodicity::diagnose_ergodicity;
use crate::error::AnalysisError;
use crate::exec::WorkerPool;
use crate::query::{bind_query, parse_query, QueryAnalysis, QueryError, SteadyCommand};
use crate::rng::SeedPlan;
use crate::sim::ObservableId;
use crate::steady::{auto_bm, auto_rd, auto_warmup_many, manual_bm, manual_rd, SteadyMethod};
use crate::transient::{auto_ir, auto_ir_cells, TransientRequest};

pub const MANIFEST_JSON: &str = "manifest.json";
pub const PARTIAL_SUFFIX: &str = ".partial";

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Query(#[from] QueryError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error("{}: {source}", .path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}: {message}", .path.display())]
    Csv { path: PathBuf, message: String },
}

impl EngineError {
    /// 2 for problems with the request itself, 1 for failures while running.
    pub fn exit_code(&self) -> i32 {
        match self {
            EngineError::Config(_) => 2,
            EngineError::Query(QueryError::Syntax { .. } | QueryError::Semantic(_) | QueryError::Bind(_)) => 2,
            _ => 1,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> EngineError + '_ {
    move |source| EngineError::Io { path: path.to_path_buf(), source }
}

/// Everything needed to reproduce a run, plus its accounting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Manifest {
    pub engine_version: String,
    pub config_hash: String,
    pub config: EngineConfig,
    pub seed_plan: SeedPlan,
    pub trajectory_seed: u64,
    pub parallelism: usize,
    pub replications_per_worker: Vec<u64>,
    pub total_replications: u64,
    pub wall_time_seconds: f64,
    pub files: Vec<String>,
    pub completed: bool,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct JobResult {
    pub outputs: JobOutputs,
    pub manifest: Manifest,
}

/// A failed job with whatever finished before the failure.
#[derive(Debug)]
pub struct JobFailure {
    pub error: EngineError,
    pub partial: Option<JobResult>,
}

impl From<EngineError> for JobFailure {
    fn from(error: EngineError) -> Self {
        JobFailure { error, partial: None }
    }
}

/// Runs one job. Replication-based work is spread over `parallelism`
/// handles and merged in replication order, so outputs do not depend on it.
pub fn run_job(config: &EngineConfig) -> Result<JobResult, Box<JobFailure>> {
    config.validate().map_err(|e| Box::new(JobFailure::from(e)))?;
    let start = Instant::now();
    let plan = SeedPlan::new(config.seed);
    let mut outputs = JobOutputs::default();
    let mut counts = vec![0; config.parallelism];
    let res = execute(config, &plan, &mut outputs, &mut counts);
    let manifest = Manifest {
        engine_version: env!("CARGO_PKG_VERSION").to_string(),
        config_hash: config.hash(),
        config: config.clone(),
        seed_plan: plan,
        trajectory_seed: plan.trajectory_seed(),
        parallelism: config.parallelism,
        total_replications: counts.iter().sum(),
        replications_per_worker: counts,
        wall_time_seconds: start.elapsed().as_secs_f64(),
        files: outputs.render().iter().map(|(n, _)| n.to_string()).collect(),
        completed: res.is_ok(),
        error: res.as_ref().err().map(|e| e.to_string()),
    };
    match res {
        Ok(()) => Ok(JobResult { outputs, manifest }),
        Err(error) => {
            if let EngineError::Analysis(AnalysisError::Aborted { partial, .. }) = &error {
                outputs.transient = partial.cells.clone();
            }
            Err(Box::new(JobFailure { error, partial: Some(JobResult { outputs, manifest }) }))
        }
    }
}

fn build_pool(
    config: &EngineConfig,
    wrap: Option<&crate::query::DerivedTargets>,
) -> Result<WorkerPool, EngineError> {
    let spec = config.model.as_ref().expect("validated: model present").spec()?;
    let pool = WorkerPool::build(config.parallelism, || {
        let sim = spec.instantiate()?;
        Ok(match wrap {
            Some(d) => d.wrap(sim),
            None => sim,
        })
    })
    .map_err(AnalysisError::from)?;
    Ok(pool)
}

fn default_or(config: &EngineConfig, names: &[String]) -> Result<Vec<ObservableId>, EngineError> {
    if names.is_empty() {
        Ok(config.model.as_ref().expect("validated: model present").spec()?.default_observables())
    } else {
        config::observable_ids(names)
    }
}

fn execute(
    config: &EngineConfig,
    plan: &SeedPlan,
    outputs: &mut JobOutputs,
    counts: &mut Vec<u64>,
) -> Result<(), EngineError> {
    let params = config.steady_params();
    let rule = config.rule();
    let mut pool = None;
    let result = (|| -> Result<(), EngineError> {
        match &config.analysis {
            AnalysisRequest::Compare { a, b } => {
                let a = read_transient_csv(Path::new(a))?;
                let b = read_transient_csv(Path::new(b))?;
                outputs.welch = compare_experiments(&a, &b, config.a_w(), config.epsilon())?;
            }
            AnalysisRequest::Transient { observables, times } => {
                let request = TransientRequest { observables: default_or(config, observables)?, times: times.clone(), rule };
                let p = pool.insert(build_pool(config, None)?);
                outputs.transient = auto_ir(&request, p, plan)?.cells;
            }
            AnalysisRequest::Steady { method, observables, warmup, horizon, percentiles } => {
                let obs = default_or(config, observables)?;
                let p = pool.insert(build_pool(config, None)?);
                let command = match method {
                    SteadyMethod::AutoRd => SteadyCommand::AutoRd,
                    SteadyMethod::AutoBm => SteadyCommand::AutoBm,
                    SteadyMethod::ManualRd => SteadyCommand::ManualRd {
                        w: warmup.expect("validated"),
                        m: horizon.expect("validated"),
                    },
                    SteadyMethod::ManualBm => SteadyCommand::ManualBm { w: warmup.expect("validated") },
                };
                run_steady(p, command, &obs, config, plan, *percentiles, outputs)?;
            }
            AnalysisRequest::Warmup { observables } => {
                let obs = default_or(config, observables)?;
                let p = pool.insert(build_pool(config, None)?);
                run_steady(p, SteadyCommand::Warmup, &obs, config, plan, false, outputs)?;
            }
            AnalysisRequest::Ergodicity { observables } => {
                let obs = default_or(config, observables)?;
                let p = pool.insert(build_pool(config, None)?);
                outputs.ergodicity = diagnose_ergodicity(p, &obs, &params, plan)?;
            }
            AnalysisRequest::Query { source, command } => {
                let query = parse_query(source)?;
                match bind_query(query, *command, config.unfold_budget)? {
                    QueryAnalysis::Transient(cells) => {
                        let p = pool.insert(build_pool(config, None)?);
                        outputs.transient = auto_ir_cells(&cells, &rule, p, plan)?.cells;
                    }
                    QueryAnalysis::Steady { command, observables, derived } => {
                        let p = pool.insert(build_pool(config, derived.as_ref())?);
                        run_steady(p, command, &observables, config, plan, false, outputs)?;
                    }
                }
            }
        }
        Ok(())
    })();
    if let Some(p) = &pool {
        *counts = p.replications_per_worker().to_vec();
    }
    result
}

fn run_steady(
    pool: &mut WorkerPool,
    command: SteadyCommand,
    obs: &[ObservableId],
    config: &EngineConfig,
    plan: &SeedPlan,
    percentiles: bool,
    outputs: &mut JobOutputs,
) -> Result<(), EngineError> {
    let params = config.steady_params();
    let seed = plan.trajectory_seed();
    outputs.steady = match command {
        SteadyCommand::Warmup => {
            let w = auto_warmup_many(pool.primary(), obs, &params.warmup, params.max_steps, seed)?;
            outputs.warmup = obs.iter().cloned().zip(w).collect();
            return Ok(());
        }
        SteadyCommand::AutoRd => auto_rd(pool, obs, &params, plan)?,
        SteadyCommand::AutoBm => auto_bm(pool.primary(), obs, &params, seed)?,
        SteadyCommand::ManualRd { w, m } => manual_rd(pool, obs, w, m, &params.rule, plan, percentiles)?,
        SteadyCommand::ManualBm { w } => manual_bm(pool.primary(), obs, w, &params, seed)?,
    };
    Ok(())
}

fn write_all(dir: &Path, result: &JobResult, suffix: &str) -> Result<Vec<PathBuf>, EngineError> {
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut written = Vec::new();
    let mut files = result.outputs.render();
    let mut manifest = serde_json::to_vec_pretty(&result.manifest).expect("manifest serializes");
    manifest.push(b'\n');
    files.push((MANIFEST_JSON, manifest));
    for (name, bytes) in files {
        let path = dir.join(format!("{name}{suffix}"));
        std::fs::write(&path, bytes).map_err(io_err(&path))?;
        written.push(path);
    }
    Ok(written)
}

/// Writes every result file and `manifest.json` into `dir`.
pub fn emit(result: &JobResult, dir: &Path) -> Result<Vec<PathBuf>, EngineError> {
    write_all(dir, result, "")
}

/// Writes whatever a failed job produced, each file suffixed `.partial`.
pub fn emit_partial(failure: &JobFailure, dir: &Path) -> Result<Vec<PathBuf>, EngineError> {
    match &failure.partial {
        Some(result) => write_all(dir, result, PARTIAL_SUFFIX),
        None => Ok(Vec::new()),
    }
}

/// Loads the configuration recorded in a manifest, checking its hash.
pub fn load_manifest(path: &Path) -> Result<Manifest, EngineError> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    let manifest: Manifest =
        serde_json::from_str(&text).map_err(|e| EngineError::Config(format!("{}: {e}", path.display())))?;
    if manifest.config.hash() != manifest.config_hash {
        return Err(EngineError::Config(format!("{}: configuration does not match its hash", path.display())));
    }
    Ok(manifest)
}
