use serde::{Deserialize, Serialize};

use super::{normal_cdf, StatsError};

/// Outcome of the batch-means goodness-of-fit step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GoodnessResult {
    pub ad_p_value: f64,
    pub lag1: f64,
    pub variance: f64,
    /// Variance at or below `minVar`: tests skipped, (p, rho) reported as (0, 0).
    pub passed_by_low_variance: bool,
}

/// A^2 for H0: sample ~ Normal(mu, sigma2) with both parameters given.
/// Returns +inf when an observation maps to probability 0 or 1.
pub fn anderson_darling_statistic(sample: &[f64], mu: f64, sigma2: f64) -> Result<f64, StatsError> {
    if !(sigma2 > 0.0) {
        return Err(StatsError::Domain(format!("variance {sigma2} must be positive")));
    }
    if sample.iter().any(|x| x.is_nan()) {
        return Err(StatsError::Domain("NaN observation".into()));
    }
    let sd = sigma2.sqrt();
    let mut u: Vec<f64> = sample.iter().map(|&x| normal_cdf((x - mu) / sd)).collect();
    u.sort_by(|a, b| a.total_cmp(b));
    let n = u.len();
    let mut acc = 0.0;
    for i in 0..n {
        let lo = u[i];
        let hi = 1.0 - u[n - 1 - i];
        if lo <= 0.0 || hi <= 0.0 {
            return Ok(f64::INFINITY);
        }
        acc += (2 * i + 1) as f64 * (lo.ln() + hi.ln());
    }
    Ok(-(n as f64) - acc / n as f64)
}

/// Limiting distribution of A^2 (Marsaglia & Marsaglia, 2004). Returns the
/// CDF and, separately, the upper tail so that tiny p-values keep precision.
fn ad_inf(z: f64) -> (f64, f64) {
    if z < 2.0 {
        let cdf = (-1.233_714_1 / z).exp() / z.sqrt()
            * (2.000_12
                + (0.247_105 - (0.064_982_1 - (0.034_796_2 - (0.011_672 - 0.001_686_91 * z) * z) * z) * z) * z);
        (cdf, 1.0 - cdf)
    } else {
        let inner = (1.0776
            - (2.30695 - (0.43424 - (0.082_433 - (0.008_056 - 0.000_314_6 * z) * z) * z) * z) * z)
            .exp();
        ((-inner).exp(), -(-inner).exp_m1())
    }
}

/// Finite-sample correction to the limiting CDF, evaluated at x = adinf(z).
fn err_fix(n: f64, x: f64) -> f64 {
    if x > 0.8 {
        return (-130.2137 + (745.2337 - (1705.091 - (1950.646 - (1116.360 - 255.7844 * x) * x) * x) * x) * x)
            / n;
    }
    let c = 0.01265 + 0.1757 / n;
    if x < c {
        let t = x / c;
        let t = t.sqrt() * (1.0 - t) * (49.0 * t - 102.0);
        return t * (0.0037 / (n * n) + 0.00078 / n + 0.00006) / n;
    }
    let t = (x - c) / (0.8 - c);
    let t = -0.000_226_33 + (6.54034 - (14.6538 - (14.458 - (8.259 - 1.91864 * t) * t) * t) * t) * t;
    t * (0.04213 / n + 0.01365 / (n * n))
}

/// p-value of the Anderson-Darling test of H0: sample ~ Normal(mu, sigma2)
/// with fully specified parameters. Requires at least 8 observations.
pub fn anderson_darling_p_value(sample: &[f64], mu: f64, sigma2: f64) -> Result<f64, StatsError> {
    if sample.len() < 8 {
        return Err(StatsError::InsufficientData { needed: 8, got: sample.len() as u64 });
    }
    let z = anderson_darling_statistic(sample, mu, sigma2)?;
    if z.is_infinite() {
        return Ok(0.0);
    }
    if z <= 0.0 {
        return Ok(1.0);
    }
    let n = sample.len() as f64;
    let (cdf, upper) = ad_inf(z);
    let fix = err_fix(n, cdf);
    // upper tail of the finite-n distribution: 1 - (cdf + fix)
    let p = upper - fix;
    Ok(p.clamp(0.0, 1.0))
}
