use std::path::Path;

use serde::{Deserialize, Serialize};

use super::EngineError;
use crate::compare::{CellSummary, ComparisonRow, ExperimentSummary};
use crate::ergodicity::ErgodicityVerdict;
use crate::fmt::g17;
use crate::sim::ObservableId;
use crate::steady::{SteadyEstimate, WarmupEstimate};
use crate::transient::{CellKey, TransientCell};

pub const TRANSIENT_CSV: &str = "transient.csv";
pub const STEADY_CSV: &str = "steady.csv";
pub const WARMUP_CSV: &str = "warmup.csv";
pub const ERGODICITY_CSV: &str = "ergodicity.csv";
pub const WELCH_CSV: &str = "welch.csv";

/// Everything a job computed, grouped by output file.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct JobOutputs {
    pub transient: Vec<TransientCell>,
    pub steady: Vec<SteadyEstimate>,
    pub warmup: Vec<(ObservableId, WarmupEstimate)>,
    pub ergodicity: Vec<ErgodicityVerdict>,
    pub welch: Vec<ComparisonRow>,
}

fn opt(x: Option<f64>) -> String {
    x.map(g17).unwrap_or_default()
}

fn table(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Vec<u8> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for r in rows {
        w.write_record(&r).expect("in-memory write");
    }
    w.into_inner().expect("in-memory flush")
}

impl JobOutputs {
    /// Every result file as (name, bytes); files without results hold only
    /// their header.
    pub fn render(&self) -> Vec<(&'static str, Vec<u8>)> {
        let transient = table(
            &["observable", "time", "mean", "halfWidth", "n", "converged", "variance"],
            self.transient.iter().map(|c| {
                vec![
                    c.key.label.clone(),
                    c.key.time.to_string(),
                    g17(c.ci.estimate),
                    g17(c.ci.half_width),
                    c.ci.n.to_string(),
                    c.ci.converged.to_string(),
                    g17(c.variance),
                ]
            }),
        );
        let steady = table(
            &["observable", "estimate", "halfWidth", "nOrSteps", "wSteps", "method", "converged", "p05", "p95"],
            self.steady.iter().map(|e| {
                let n_or_steps = if e.method.is_rd() { e.ci.n } else { e.samples };
                vec![
                    e.observable.to_string(),
                    g17(e.ci.estimate),
                    g17(e.ci.half_width),
                    n_or_steps.to_string(),
                    e.w_steps.to_string(),
                    e.method.to_string(),
                    e.ci.converged.to_string(),
                    opt(e.percentile_interval.map(|p| p.0)),
                    opt(e.percentile_interval.map(|p| p.1)),
                ]
            }),
        );
        let warmup = table(
            &["observable", "wSteps", "converged", "lowVariance", "iterations", "adPValue", "lag1"],
            self.warmup.iter().map(|(o, w)| {
                vec![
                    o.to_string(),
                    w.w_steps.to_string(),
                    w.converged.to_string(),
                    w.passed_by_low_variance.to_string(),
                    w.iterations.to_string(),
                    g17(w.final_test.ad_p_value),
                    g17(w.final_test.lag1),
                ]
            }),
        );
        let ergodicity = table(
            &["observable", "status", "bmEstimate", "rdEstimate", "discrepancy", "adPValue"],
            self.ergodicity.iter().map(|v| {
                vec![
                    v.observable.to_string(),
                    v.status.to_string(),
                    opt(v.bm.map(|c| c.estimate)),
                    opt(v.rd.map(|c| c.estimate)),
                    g17(v.discrepancy),
                    opt(v.ad_p_value),
                ]
            }),
        );
        let welch = table(
            &["observable", "time", "tau", "nu", "reject", "power", "degenerate"],
            self.welch.iter().map(|r| {
                vec![
                    r.key.label.clone(),
                    r.key.time.to_string(),
                    g17(r.outcome.tau),
                    g17(r.outcome.nu),
                    r.outcome.reject.to_string(),
                    g17(r.outcome.power),
                    r.outcome.degenerate.to_string(),
                ]
            }),
        );
        vec![
            (TRANSIENT_CSV, transient),
            (STEADY_CSV, steady),
            (WARMUP_CSV, warmup),
            (ERGODICITY_CSV, ergodicity),
            (WELCH_CSV, welch),
        ]
    }
}

/// Reads per-cell summaries back from a transient CSV.
pub fn read_transient_csv(path: &Path) -> Result<ExperimentSummary, EngineError> {
    let err = |message: String| EngineError::Csv { path: path.to_path_buf(), message };
    let mut r = csv::Reader::from_path(path).map_err(|e| err(e.to_string()))?;
    let headers = r.headers().map_err(|e| err(e.to_string()))?.clone();
    let col = |name: &str| {
        headers.iter().position(|h| h == name).ok_or_else(|| err(format!("missing column `{name}`")))
    };
    let (obs, time, mean, n, var) = (col("observable")?, col("time")?, col("mean")?, col("n")?, col("variance")?);
    let mut cells = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| err(e.to_string()))?;
        let field = |i: usize| rec.get(i).unwrap_or("");
        let bad = |what: &str, i: usize| err(format!("row {}: bad {what} `{}`", line + 2, field(i)));
        let key = CellKey { label: field(obs).to_string(), time: field(time).parse().map_err(|_| bad("time", time))? };
        let summary = CellSummary {
            mean: field(mean).parse().map_err(|_| bad("mean", mean))?,
            variance: field(var).parse().map_err(|_| bad("variance", var))?,
            n: field(n).parse().map_err(|_| bad("n", n))?,
        };
        cells.push((key, summary));
    }
    Ok(ExperimentSummary { cells })
}
