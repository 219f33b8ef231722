mod args;
mod config_file;

use std::io::{BufReader, Write};
use std::path::Path;
use std::process::ExitCode;

use clap::Parser;
use smc_core::engine::{
    emit, emit_partial, load_manifest, run_job, sweep_values, AnalysisRequest, EngineConfig, EngineError, JobResult,
    ModelChoice,
};
use smc_core::models::ModelSpec;
use smc_core::steady::{SteadyMethod, WarmupParams};

use args::{parse_times, Cli, Command, Common};

fn main() -> ExitCode {
    let argv = match config_file::expand(std::env::args().collect()) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn config_from(common: &Common, analysis: AnalysisRequest) -> Result<EngineConfig, EngineError> {
    let model = common.model.as_ref().map(|name| ModelChoice { name: name.clone(), params: common.model_params.clone() });
    if model.is_none() && !matches!(analysis, AnalysisRequest::Compare { .. }) {
        return Err(EngineError::Config("--model is required".into()));
    }
    let mut c = EngineConfig::new(model, analysis);
    c.alpha = common.alpha;
    c.delta = common.delta;
    c.delta_mode = common.delta_mode;
    c.block_size = common.block_size;
    c.max_sims = common.max_sims;
    c.max_steps = common.max_steps;
    c.a_w = common.a_w;
    c.epsilon = common.epsilon;
    c.parallelism = common.parallelism;
    c.seed = common.seed;
    c.warmup = WarmupParams {
        batches: common.batches,
        discard: common.discard,
        batch_size: common.batch_size,
        min_var: common.min_var,
        a_star: common.a_star,
    };
    c.horizon_multiplier = common.horizon_multiplier;
    c.unfold_budget = common.unfold_budget;
    Ok(c)
}

fn run(cli: Cli) -> Result<(), EngineError> {
    let (common, analysis) = match cli.command {
        Command::Replay { manifest, out } => {
            let m = load_manifest(&manifest)?;
            return run_one(&m.config, &out);
        }
        Command::ServeSim { model, model_params, listen } => return serve_sim(&model, &model_params, listen),
        Command::Transient { common, times } => {
            let times = parse_times(&times).map_err(EngineError::Config)?;
            let observables = common.observables.clone();
            (common, AnalysisRequest::Transient { observables, times })
        }
        Command::Steady { common, method, warmup, horizon, percentiles } => {
            let observables = common.observables.clone();
            if percentiles && method != SteadyMethod::ManualRd {
                return Err(EngineError::Config("--percentiles applies to manualRD only".into()));
            }
            (common, AnalysisRequest::Steady { method, observables, warmup, horizon, percentiles })
        }
        Command::Warmup { common } => {
            let observables = common.observables.clone();
            (common, AnalysisRequest::Warmup { observables })
        }
        Command::Ergodicity { common } => {
            let observables = common.observables.clone();
            (common, AnalysisRequest::Ergodicity { observables })
        }
        Command::Compare { common, first, second } => {
            let a = first.to_string_lossy().into_owned();
            let b = second.to_string_lossy().into_owned();
            (common, AnalysisRequest::Compare { a, b })
        }
        Command::Query { common, query, eval } => {
            let source = std::fs::read_to_string(&query)
                .map_err(|source| EngineError::Io { path: query.clone(), source })?;
            (common, AnalysisRequest::Query { source, command: eval })
        }
    };
    let config = config_from(&common, analysis)?;
    match &common.sweep {
        None => run_one(&config, &common.out),
        Some(spec) => {
            let (key, values) = sweep_values(spec)?;
            for v in values {
                let mut c = config.clone();
                let model = c.model.as_mut().ok_or_else(|| EngineError::Config("--sweep needs a model".into()))?;
                model.params.retain(|(k, _)| *k != key);
                model.params.push((key.clone(), v.clone()));
                println!("== {key}={v}");
                run_one(&c, &common.out.join(format!("{key}={v}")))?;
            }
            Ok(())
        }
    }
}

fn run_one(config: &EngineConfig, out: &Path) -> Result<(), EngineError> {
    match run_job(config) {
        Ok(result) => {
            emit(&result, out)?;
            summarize(&result);
            println!("results written to {}", out.display());
            Ok(())
        }
        Err(failure) => {
            let written = emit_partial(&failure, out)?;
            if !written.is_empty() {
                eprintln!("partial results written to {} (*.partial)", out.display());
            }
            Err(failure.error)
        }
    }
}

fn summarize(r: &JobResult) {
    let o = &r.outputs;
    let mut unconverged = 0;
    if !o.transient.is_empty() {
        let done = o.transient.iter().filter(|c| c.ci.converged).count();
        unconverged += o.transient.len() - done;
        println!(
            "transient: {} cells, {done} converged, {} replications",
            o.transient.len(),
            r.manifest.total_replications
        );
        if o.transient.len() <= 20 {
            for c in &o.transient {
                println!("  {}@{}: {:.6} ± {:.6} (n={})", c.key.label, c.key.time, c.ci.estimate, c.ci.half_width, c.ci.n);
            }
        }
    }
    for e in &o.steady {
        unconverged += usize::from(!e.ci.converged);
        println!(
            "{} {}: {:.6} ± {:.6} (n={}, w={}, converged={})",
            e.method, e.observable, e.ci.estimate, e.ci.half_width, e.ci.n, e.w_steps, e.ci.converged
        );
    }
    for (obs, w) in &o.warmup {
        unconverged += usize::from(!w.converged);
        println!("warmup {obs}: w={} (converged={}, iterations={})", w.w_steps, w.converged, w.iterations);
    }
    for v in &o.ergodicity {
        println!("ergodicity {}: {} (discrepancy {:.6})", v.observable, v.status, v.discrepancy);
    }
    if !o.welch.is_empty() {
        let rejected = o.welch.iter().filter(|w| w.outcome.reject).count();
        println!("welch: {} cells, {rejected} rejections", o.welch.len());
    }
    if unconverged > 0 {
        eprintln!("warning: {unconverged} estimate(s) did not reach the requested precision");
    }
}

fn serve_sim(model: &str, params: &[(String, String)], listen: Option<String>) -> Result<(), EngineError> {
    let spec = ModelSpec::parse(model, params).map_err(|e| EngineError::Config(e.to_string()))?;
    let io_err = |source| EngineError::Io { path: "<serve-sim>".into(), source };
    match listen {
        None => {
            let mut sim = spec.instantiate().map_err(|e| EngineError::Config(e.to_string()))?;
            let stdin = std::io::stdin();
            smc_core::sim::serve(sim.as_mut(), stdin.lock(), std::io::stdout().lock()).map_err(io_err)
        }
        Some(addr) => {
            let listener = std::net::TcpListener::bind(&addr).map_err(io_err)?;
            let local = listener.local_addr().map_err(io_err)?;
            println!("listening on {local}");
            std::io::stdout().flush().map_err(io_err)?;
            for stream in listener.incoming() {
                let stream = stream.map_err(io_err)?;
                stream.set_nodelay(true).ok();
                let spec = spec.clone();
                std::thread::spawn(move || {
                    let Ok(mut sim) = spec.instantiate() else { return };
                    let Ok(read) = stream.try_clone() else { return };
                    let _ = smc_core::sim::serve(sim.as_mut(), BufReader::new(read), stream);
                });
            }
            Ok(())
        }
    }
}
