#![allow(clippy::too_many_arguments)]

//! Reference computations that share no code path with the library kernels:
//! adaptive Simpson quadrature of defining integrals, bisection, and Monte
//! Carlo with a locally defined generator.
#![allow(dead_code)]

use statrs::function::erf::erfc;
use statrs::function::gamma::ln_gamma;

pub fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    fn rec<F: Fn(f64) -> f64>(
        f: &F,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        if depth == 0 || (left + right - whole).abs() <= 15.0 * tol.max(1e-17) {
            left + right + (left + right - whole) / 15.0
        } else {
            rec(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
                + rec(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
        }
    }
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    rec(f, a, b, fa, fm, fb, whole, tol.max(1e-15), 18)
}

/// Integrates over [a,b] split into `pieces` equal panels.
pub fn simpson_panels<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, pieces: usize, tol: f64) -> f64 {
    let h = (b - a) / pieces as f64;
    (0..pieces)
        .map(|i| simpson(f, a + i as f64 * h, a + (i + 1) as f64 * h, tol / pieces as f64))
        .sum()
}

pub fn phi(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

fn t_density(x: f64, df: f64) -> f64 {
    let c = ln_gamma((df + 1.0) / 2.0) - ln_gamma(df / 2.0) - 0.5 * (df * std::f64::consts::PI).ln();
    (c - (df + 1.0) / 2.0 * (1.0 + x * x / df).ln()).exp()
}

/// Central t CDF by quadrature of the density on [0, |x|].
pub fn t_cdf_quadrature(x: f64, df: f64) -> f64 {
    let half = simpson_panels(&|u| t_density(u, df), 0.0, x.abs(), 64, 1e-14);
    if x >= 0.0 {
        0.5 + half
    } else {
        0.5 - half
    }
}

/// Quantile by bisection on the quadrature CDF.
pub fn t_quantile_bisection(df: f64, p: f64) -> f64 {
    let (mut lo, mut hi) = (-1e3, 1e3);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if t_cdf_quadrature(mid, df) < p {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-11 {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Non-central t CDF from its defining mixture:
/// P(T <= x) = E[ Phi(x * sqrt(U/df) - theta) ], U ~ chi-square(df).
/// Integrated over v = sqrt(U) to remove the density singularity at 0.
pub fn nct_cdf_quadrature(x: f64, df: f64, theta: f64) -> f64 {
    let ln_c = (1.0 - df / 2.0) * std::f64::consts::LN_2 - ln_gamma(df / 2.0);
    // density of v = sqrt(U): 2^(1-df/2)/Gamma(df/2) v^(df-1) exp(-v^2/2)
    let f = |v: f64| {
        if v <= 0.0 {
            return 0.0;
        }
        let dens = (ln_c + (df - 1.0) * v.ln() - 0.5 * v * v).exp();
        phi(x * v / df.sqrt() - theta) * dens
    };
    let upper = df.sqrt() + 40.0;
    simpson_panels(&f, 0.0, upper, 400, 1e-14)
}

/// Anderson-Darling A^2 for a sample already mapped to uniforms.
pub fn a2_of_uniforms(u: &mut [f64]) -> f64 {
    u.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = u.len();
    let mut s = 0.0;
    for i in 0..n {
        let k = (2 * i + 1) as f64;
        s += k * (u[i].ln() + (1.0 - u[n - 1 - i]).ln());
    }
    -(n as f64) - s / n as f64
}

/// Small self-contained generator (PCG-XSH-RR 64/32 pair) for Monte Carlo oracles.
pub struct OracleRng(u64);

impl OracleRng {
    pub fn new(seed: u64) -> Self {
        OracleRng(seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407))
    }
    fn next_u32(&mut self) -> u32 {
        let old = self.0;
        self.0 = old.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        let xorshifted = (((old >> 18) ^ old) >> 27) as u32;
        let rot = (old >> 59) as u32;
        xorshifted.rotate_right(rot)
    }
    pub fn uniform(&mut self) -> f64 {
        let hi = (self.next_u32() as u64) << 21;
        let lo = (self.next_u32() as u64) >> 11;
        ((hi | lo) as f64 + 0.5) / (1u64 << 53) as f64
    }
    pub fn normal(&mut self) -> f64 {
        let u1 = self.uniform();
        let u2 = self.uniform();
        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    }
}

/// Monte Carlo upper-tail probability P(A^2 >= a2) for samples of size n
/// under the fully specified null.
pub fn ad_p_value_monte_carlo(a2_values: &[f64], n: usize, draws: usize, seed: u64) -> Vec<f64> {
    let mut rng = OracleRng::new(seed);
    let mut sims = Vec::with_capacity(draws);
    let mut buf = vec![0.0; n];
    for _ in 0..draws {
        for b in buf.iter_mut() {
            *b = rng.uniform();
        }
        sims.push(a2_of_uniforms(&mut buf));
    }
    a2_values
        .iter()
        .map(|&a| sims.iter().filter(|&&s| s >= a).count() as f64 / draws as f64)
        .collect()
}

/// Monte Carlo power of the two-sided Welch test: draws two normal samples
/// with the given variances and sizes whose means differ by `epsilon`.
pub fn welch_power_monte_carlo(
    var_a: f64,
    n_a: usize,
    var_b: f64,
    n_b: usize,
    a_w: f64,
    epsilon: f64,
    draws: usize,
    seed: u64,
    t_crit: impl Fn(f64) -> f64,
) -> f64 {
    let mut rng = OracleRng::new(seed);
    let mut rejections = 0usize;
    let _ = a_w;
    for _ in 0..draws {
        let stats = |rng: &mut OracleRng, mu: f64, var: f64, n: usize| {
            let xs: Vec<f64> = (0..n).map(|_| mu + var.sqrt() * rng.normal()).collect();
            let m = xs.iter().sum::<f64>() / n as f64;
            let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n as f64 - 1.0);
            (m, v)
        };
        let (ma, va) = stats(&mut rng, epsilon, var_a, n_a);
        let (mb, vb) = stats(&mut rng, 0.0, var_b, n_b);
        let (fa, fb) = (va / n_a as f64, vb / n_b as f64);
        let tau = (ma - mb) / (fa + fb).sqrt();
        let nu = (fa + fb).powi(2) / (fa * fa / (n_a as f64 - 1.0) + fb * fb / (n_b as f64 - 1.0));
        if tau.abs() > t_crit(nu) {
            rejections += 1;
        }
    }
    rejections as f64 / draws as f64
}
