use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use smc_core::query::CommandKind;
use smc_core::stats::DeltaMode;
use smc_core::steady::SteadyMethod;

#[derive(Debug, Parser)]
#[command(
    name = "engine",
    version,
    about = "Statistical model checking of stochastic simulators",
    arg_required_else_help = true,
    args_override_self = true
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Transient means E[obs_t] at the given times (replication based).
    Transient {
        #[command(flatten)]
        common: Common,
        /// Time points: a comma list `1,5,10` or a range `from:step:to`.
        #[arg(long, required = true)]
        times: String,
    },
    /// Steady-state means (replication-deletion or batch means).
    Steady {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "autoRD", value_parser = parse_method)]
        method: SteadyMethod,
        /// Fixed warmup length for manualRD / manualBM.
        #[arg(long)]
        warmup: Option<u64>,
        /// Replication horizon for manualRD.
        #[arg(long)]
        horizon: Option<u64>,
        /// manualRD: also report the 5th/95th percentile band.
        #[arg(long)]
        percentiles: bool,
    },
    /// Warmup length of each observable.
    Warmup {
        #[command(flatten)]
        common: Common,
    },
    /// Stationarity and ergodicity diagnostic (autoRD against autoBM).
    Ergodicity {
        #[command(flatten)]
        common: Common,
    },
    /// Welch tests between two transient result files.
    Compare {
        #[command(flatten)]
        common: Common,
        first: PathBuf,
        second: PathBuf,
    },
    /// Runs the analysis described by a query file.
    Query {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        query: PathBuf,
        /// Which eval command to run when the file has several.
        #[arg(long = "eval", value_parser = parse_command)]
        eval: Option<CommandKind>,
    },
    /// Re-runs the job recorded in a manifest.
    Replay {
        manifest: PathBuf,
        #[arg(long, default_value = "results")]
        out: PathBuf,
    },
    /// Serves a built-in model over the line protocol (stdin/stdout or TCP).
    ServeSim {
        #[arg(long)]
        model: String,
        #[arg(long = "model-param", value_parser = parse_kv)]
        model_params: Vec<(String, String)>,
        /// Listen on this address instead of stdin/stdout; one model per connection.
        #[arg(long)]
        listen: Option<String>,
    },
}

#[derive(Debug, Args)]
pub struct Common {
    /// Built-in model (kelly, crra, iidNormal, ar1, constant, counter) or
    /// `cmd:<program args>` / `tcp:<host:port>`.
    #[arg(long)]
    pub model: Option<String>,
    /// Model parameter `key=value`; repeatable.
    #[arg(long = "model-param", value_parser = parse_kv)]
    pub model_params: Vec<(String, String)>,
    /// Observable to analyse; repeatable or comma separated. Defaults to the model's.
    #[arg(long = "observable", value_delimiter = ',')]
    pub observables: Vec<String>,
    /// Key=value file whose entries act as flags given before the command line.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    /// Target full width of the confidence interval.
    #[arg(long, default_value_t = 0.1)]
    pub delta: f64,
    #[arg(long = "delta-mode", default_value = "absolute")]
    pub delta_mode: DeltaMode,
    /// Replications per block (bl).
    #[arg(long = "bl", default_value_t = 20)]
    pub block_size: u64,
    #[arg(long = "max-sims")]
    pub max_sims: Option<u64>,
    #[arg(long = "max-steps", default_value_t = smc_core::steady::DEFAULT_MAX_STEPS)]
    pub max_steps: u64,
    /// Welch test significance (defaults to --alpha).
    #[arg(long = "aw")]
    pub a_w: Option<f64>,
    /// Welch effect size for the power (defaults to --delta).
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long, default_value_t = 1)]
    pub parallelism: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "results")]
    pub out: PathBuf,
    /// Run one job per value of a model parameter: `key=from:step:to`.
    #[arg(long)]
    pub sweep: Option<String>,
    /// Number of batches B for warmup detection and batch means.
    #[arg(long, default_value_t = 128)]
    pub batches: usize,
    /// Leading batches b ignored by the tests.
    #[arg(long, default_value_t = 4)]
    pub discard: usize,
    /// Initial batch size.
    #[arg(long = "batch-size", default_value_t = 16)]
    pub batch_size: u64,
    #[arg(long = "min-var", default_value_t = 1e-7)]
    pub min_var: f64,
    /// Normality test significance.
    #[arg(long = "a-star", default_value_t = 0.01)]
    pub a_star: f64,
    /// Replication horizon as a multiple of the detected warmup.
    #[arg(long = "horizon-multiplier", default_value_t = 2)]
    pub horizon_multiplier: u64,
    /// Cap on operator unfoldings per query target.
    #[arg(long = "unfold-budget", default_value_t = smc_core::query::DEFAULT_UNFOLD_BUDGET)]
    pub unfold_budget: u64,
}

fn parse_kv(s: &str) -> Result<(String, String), String> {
    match s.split_once('=') {
        Some((k, v)) if !k.trim().is_empty() => Ok((k.trim().to_string(), v.trim().to_string())),
        _ => Err(format!("expected key=value, got `{s}`")),
    }
}

fn parse_method(s: &str) -> Result<SteadyMethod, String> {
    s.parse()
}

fn parse_command(s: &str) -> Result<CommandKind, String> {
    CommandKind::from_keyword(s).ok_or_else(|| format!("unknown eval command `{s}`"))
}

/// Parses a time list `1,5,10` or range `from:step:to`.
pub fn parse_times(s: &str) -> Result<Vec<u64>, String> {
    let bad = |p: &str| format!("bad time `{p}` in `{s}`");
    if s.contains(':') {
        let parts: Vec<u64> = s.split(':').map(|p| p.trim().parse().map_err(|_| bad(p))).collect::<Result<_, _>>()?;
        return match parts[..] {
            [from, step, to] if step > 0 && from <= to => Ok((from..=to).step_by(step as usize).collect()),
            _ => Err(format!("time range `{s}` must be from:step:to with step > 0 and from <= to")),
        };
    }
    s.split(',').map(|p| p.trim().parse().map_err(|_| bad(p))).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn times() {
        assert_eq!(parse_times("1,5,10").unwrap(), vec![1, 5, 10]);
        assert_eq!(parse_times("2:3:9").unwrap(), vec![2, 5, 8]);
        assert!(parse_times("1:0:4").is_err());
        assert!(parse_times("a").is_err());
    }

    #[test]
    fn key_values() {
        assert_eq!(parse_kv("piStar = 0.6").unwrap(), ("piStar".into(), "0.6".into()));
        assert!(parse_kv("=1").is_err());
        assert!(parse_kv("x").is_err());
    }

    #[test]
    fn later_flags_override_earlier_ones() {
        let cli = Cli::try_parse_from(["engine", "warmup", "--alpha", "0.1", "--model", "kelly", "--alpha", "0.2"]).unwrap();
        match cli.command {
            Command::Warmup { common } => assert_eq!(common.alpha, 0.2),
            other => panic!("{other:?}"),
        }
    }
}
