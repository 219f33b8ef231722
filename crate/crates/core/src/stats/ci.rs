use serde::{Deserialize, Serialize};

use super::{t_quantile, RunningStats, StatsError};

/// 0.99 quantile of the standard normal.
const Z_99: f64 = 2.326_347_874_040_840_8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum DeltaMode {
    #[default]
    Absolute,
    Relative,
}

impl std::str::FromStr for DeltaMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "absolute" | "abs" => Ok(DeltaMode::Absolute),
            "relative" | "rel" => Ok(DeltaMode::Relative),
            other => Err(format!("unknown delta mode `{other}`")),
        }
    }
}

impl std::fmt::Display for DeltaMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            DeltaMode::Absolute => "absolute",
            DeltaMode::Relative => "relative",
        })
    }
}

/// A confidence interval `estimate ± half_width` at level 1-alpha, together
/// with the precision target it was built against.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CiResult {
    pub estimate: f64,
    pub half_width: f64,
    pub n: u64,
    pub alpha: f64,
    pub delta: f64,
    pub delta_mode: DeltaMode,
    pub converged: bool,
}

impl CiResult {
    pub fn width(&self) -> f64 {
        2.0 * self.half_width
    }

    pub fn contains(&self, x: f64) -> bool {
        (x - self.estimate).abs() <= self.half_width
    }

    /// Whether a full width `width` around `estimate` meets the target.
    /// Relative targets fall back to absolute when |estimate| < 1e-12.
    pub fn meets_target(width: f64, estimate: f64, delta: f64, mode: DeltaMode) -> bool {
        match mode {
            DeltaMode::Relative if estimate.abs() >= 1e-12 => width / estimate.abs() <= delta,
            _ => width <= delta,
        }
    }
}

fn check_alpha(alpha: f64) -> Result<(), StatsError> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(StatsError::Domain(format!("alpha {alpha} outside (0,1)")))
    }
}

/// Half-width t_{n-1, 1-alpha/2} * sqrt(s^2 / n) of the (1-alpha) CI on the mean.
pub fn ci_half_width(stats: &RunningStats, alpha: f64) -> Result<f64, StatsError> {
    autocorr_adjusted_half_width(stats, alpha, 0.0)
}

/// Half-width with the batch-means variance inflated by (1+rho)/(1-rho) to
/// account for residual lag-1 correlation. Equals [`ci_half_width`] at rho = 0.
pub fn autocorr_adjusted_half_width(
    stats: &RunningStats,
    alpha: f64,
    rho: f64,
) -> Result<f64, StatsError> {
    check_alpha(alpha)?;
    if !(rho.abs() < 1.0) {
        return Err(StatsError::Domain(format!("|rho| = {} must be below 1", rho.abs())));
    }
    if stats.count() < 2 {
        return Err(StatsError::InsufficientData { needed: 2, got: stats.count() });
    }
    let n = stats.count() as f64;
    let var = stats.variance();
    if var == 0.0 {
        return Ok(0.0);
    }
    let inflation = if rho == 0.0 { 1.0 } else { (1.0 + rho) / (1.0 - rho) };
    let t = t_quantile(n - 1.0, 1.0 - alpha / 2.0)?;
    Ok(t * (var * inflation / n).sqrt())
}

/// Lag-1 sample autocorrelation around a given mean; 0 for a constant sample.
pub fn lag1_autocorrelation(sample: &[f64], mean: f64, variance: f64) -> Result<f64, StatsError> {
    if sample.len() < 2 {
        return Err(StatsError::InsufficientData { needed: 2, got: sample.len() as u64 });
    }
    if variance == 0.0 {
        return Ok(0.0);
    }
    let denom: f64 = sample.iter().map(|x| (x - mean) * (x - mean)).sum();
    if denom == 0.0 {
        return Ok(0.0);
    }
    let num: f64 = sample.windows(2).map(|w| (w[0] - mean) * (w[1] - mean)).sum();
    Ok(num / denom)
}

/// Acceptance threshold sin(0.927 - z_{0.99} / sqrt(size)) for the lag-1
/// autocorrelation of `size` batch means.
pub fn lag1_threshold(size: usize) -> f64 {
    (0.927 - Z_99 / (size as f64).sqrt()).sin()
}
