//! Renewal-reward estimates of the rate and CLT variance, and the
//! goodness-of-fit tests used to check window laws.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};
use statrs::function::gamma::ln_gamma;

use crate::engine::{simulate, SimConfig};
use crate::error::{invalid, Error, Result};
use crate::kernel::Kernel;
use crate::renewal::{decompose, WindowSample};

/// Significance level used for every pass/fail verdict.
pub const SIGNIFICANCE: f64 = 0.01;

/// Moments of `(τ, W)` and the derived law-of-large-numbers and CLT
/// quantities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LimitEstimates {
    pub n_windows: usize,
    pub mean_tau: f64,
    pub se_mean_tau: f64,
    pub mean_w: f64,
    pub se_mean_w: f64,
    pub var_tau: f64,
    pub var_w: f64,
    pub cov_tau_w: f64,
    /// `Σ W / Σ τ`, the events-per-unit-time estimate.
    pub m_hat: f64,
    /// Delta-method standard error of `m_hat`.
    pub se_m_hat: f64,
    /// `Var(W - m τ) / E τ`.
    pub sigma2_hat: f64,
}

pub fn lln_estimate(sample: &WindowSample) -> Result<LimitEstimates> {
    lln_from_pairs(&sample.pairs())
}

/// [`lln_estimate`] on raw `(τ, W)` pairs.
pub fn lln_from_pairs(pairs: &[(f64, f64)]) -> Result<LimitEstimates> {
    let n = pairs.len();
    if n < 2 {
        return Err(Error::InsufficientData(format!(
            "need at least 2 windows, got {n}"
        )));
    }
    let nf = n as f64;
    let sum_tau: f64 = pairs.iter().map(|p| p.0).sum();
    let sum_w: f64 = pairs.iter().map(|p| p.1).sum();
    let mean_tau = sum_tau / nf;
    let mean_w = sum_w / nf;
    let m_hat = sum_w / sum_tau;

    let (mut stt, mut sww, mut stw, mut sdd) = (0.0, 0.0, 0.0, 0.0);
    for &(tau, w) in pairs {
        let dt = tau - mean_tau;
        let dw = w - mean_w;
        let d = w - m_hat * tau;
        stt += dt * dt;
        sww += dw * dw;
        stw += dt * dw;
        sdd += d * d;
    }
    let var_tau = stt / (nf - 1.0);
    let var_w = sww / (nf - 1.0);
    let cov_tau_w = stw / (nf - 1.0);
    // W - m̂τ has sample mean exactly zero in exact arithmetic.
    let var_resid = sdd / (nf - 1.0);

    Ok(LimitEstimates {
        n_windows: n,
        mean_tau,
        se_mean_tau: (var_tau / nf).sqrt(),
        mean_w,
        se_mean_w: (var_w / nf).sqrt(),
        var_tau,
        var_w,
        cov_tau_w,
        m_hat,
        se_m_hat: (var_resid / nf).sqrt() / mean_tau,
        sigma2_hat: var_resid / mean_tau,
    })
}

/// Plug-in estimate of the CLT variance `Var(W - m τ) / E τ`.
pub fn clt_sigma2(sample: &WindowSample) -> Result<f64> {
    Ok(lln_estimate(sample)?.sigma2_hat)
}

/// Centering and scale for [`clt_normality_check`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CltReference {
    /// Known limit `m` and variance `σ²`.
    Oracle { m: f64, sigma2: f64 },
    /// Estimate `m` and `σ²` from the pooled windows of the same replicas,
    /// cut with the given window length.
    Estimated { support: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CltCheck {
    pub statistic: f64,
    pub m: f64,
    pub sigma2: f64,
    pub n_replicas: usize,
    pub t: f64,
}

/// Simulates `n_replicas` independent paths on `[0, t]` and returns the
/// Kolmogorov distance between the law of `√t (N_t / t - m)` and
/// `N(0, σ²)`.
///
/// `N_t` is integer valued, which puts atoms of mass about `1/(σ√t)` in the
/// empirical law; each count is spread uniformly over `[N_t - ½, N_t + ½]`
/// (seeded per replica) so that the distance measures the approach to
/// normality rather than the lattice step.
pub fn clt_normality_check(
    kernel: &Kernel,
    lambda: f64,
    t: f64,
    n_replicas: usize,
    seed: u64,
    reference: CltReference,
) -> Result<CltCheck> {
    if n_replicas < 500 {
        return Err(invalid(
            "n_replicas",
            format!("need at least 500, got {n_replicas}"),
        ));
    }
    let min_t = 10.0 * (kernel.support() + 1.0 / lambda);
    if !(t >= min_t) {
        return Err(invalid(
            "t",
            format!("must hold about 10 windows (t >= {min_t})"),
        ));
    }
    let mut counts = Vec::with_capacity(n_replicas);
    let mut pooled: Option<WindowSample> = None;
    for r in 0..n_replicas as u64 {
        let stream = simulate(kernel, &SimConfig::new(lambda, t).seed(seed).replica(r))?;
        let mut jitter = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
        jitter.set_stream(r);
        counts.push(stream.len() as f64 + jitter.random::<f64>() - 0.5);
        if let CltReference::Estimated { support } = reference {
            let s = decompose(&stream, support)?;
            match pooled.as_mut() {
                Some(p) => p.merge(s),
                None => pooled = Some(s),
            }
        }
    }
    let (m, sigma2) = match reference {
        CltReference::Oracle { m, sigma2 } => (m, sigma2),
        CltReference::Estimated { .. } => {
            let est = lln_estimate(pooled.as_ref().expect("n_replicas >= 500"))?;
            (est.m_hat, est.sigma2_hat)
        }
    };
    if !(sigma2 > 0.0) {
        return Err(invalid("sigma2", format!("must be positive, got {sigma2}")));
    }
    let normal = Normal::new(0.0, sigma2.sqrt()).map_err(|e| invalid("sigma2", e.to_string()))?;
    let root_t = t.sqrt();
    let mut scaled: Vec<f64> = counts.iter().map(|&n| root_t * (n / t - m)).collect();
    let statistic = ks_statistic(&mut scaled, |x| normal.cdf(x));
    Ok(CltCheck {
        statistic,
        m,
        sigma2,
        n_replicas,
        t,
    })
}

/// Outcome of a Kolmogorov–Smirnov test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KsTest {
    pub statistic: f64,
    pub p_value: f64,
    pub pass: bool,
}

impl KsTest {
    fn from_statistic(statistic: f64, effective_n: f64) -> Self {
        let p_value = kolmogorov_survival(effective_n, statistic);
        Self {
            statistic,
            p_value,
            pass: p_value >= SIGNIFICANCE,
        }
    }
}

/// Sup distance between the empirical CDF of `values` and `cdf`. Sorts
/// `values` in place.
pub fn ks_statistic(values: &mut [f64], cdf: impl Fn(f64) -> f64) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len() as f64;
    values
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            let above = (i + 1) as f64 / n - f;
            let below = f - i as f64 / n;
            above.max(below)
        })
        .fold(0.0, f64::max)
}

/// One-sample KS test against `Exp(rate)`.
pub fn ks_exponential(values: &[f64], rate: f64) -> Result<KsTest> {
    if values.is_empty() {
        return Err(Error::InsufficientData("no values to test".into()));
    }
    if !(rate > 0.0 && rate.is_finite()) {
        return Err(invalid("rate", format!("must be positive, got {rate}")));
    }
    let mut v = values.to_vec();
    let d = ks_statistic(
        &mut v,
        |x| if x <= 0.0 { 0.0 } else { -(-rate * x).exp_m1() },
    );
    Ok(KsTest::from_statistic(d, values.len() as f64))
}

/// Two-sample KS test.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<KsTest> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::InsufficientData(
            "both samples must be nonempty".into(),
        ));
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    Ok(KsTest::from_statistic(d, na * nb / (na + nb)))
}

/// `P(D_n > d)` from the asymptotic Kolmogorov distribution, with
/// Stephens' finite-`n` scaling of the argument.
pub fn kolmogorov_survival(n: f64, d: f64) -> f64 {
    let root = n.sqrt();
    let x = (root + 0.12 + 0.11 / root) * d;
    if x <= 0.0 {
        return 1.0;
    }
    if x < 1.0 {
        // Theta-function form converges fast for small x.
        let c = std::f64::consts::PI * std::f64::consts::PI / (8.0 * x * x);
        let cdf: f64 = (1..=20)
            .map(|k| {
                let j = (2 * k - 1) as f64;
                (-j * j * c).exp()
            })
            .sum::<f64>()
            * (2.0 * std::f64::consts::PI).sqrt()
            / x;
        (1.0 - cdf).clamp(0.0, 1.0)
    } else {
        let tail: f64 = (1..=100)
            .map(|k| {
                let k = k as f64;
                let sign = if k as u64 % 2 == 1 { 1.0 } else { -1.0 };
                sign * (-2.0 * k * k * x * x).exp()
            })
            .sum();
        (2.0 * tail).clamp(0.0, 1.0)
    }
}

/// Outcome of a chi-square goodness-of-fit test.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChiSquareTest {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
    pub pass: bool,
    /// Lower edge of each bin; the last bin is open to the right.
    pub bins: Vec<u64>,
}

/// Chi-square test of integer counts against `Poisson(mean)`.
///
/// Bins are grown from the left until each expects at least 5 observations;
/// the right tail is pooled into the last bin.
pub fn poisson_gof(counts: &[u64], mean: f64) -> Result<ChiSquareTest> {
    if counts.is_empty() {
        return Err(Error::InsufficientData("no counts to test".into()));
    }
    if !(mean > 0.0 && mean.is_finite()) {
        return Err(invalid("mean", format!("must be positive, got {mean}")));
    }
    let n = counts.len() as f64;
    let pmf = |k: u64| (k as f64 * mean.ln() - mean - ln_gamma(k as f64 + 1.0)).exp();

    // (lower edge, expected count) for each closed bin.
    let mut bins: Vec<(u64, f64)> = Vec::new();
    let mut remaining = 1.0;
    let mut k = 0u64;
    let mut lower = 0u64;
    let mut acc = 0.0;
    while n * remaining >= 10.0 {
        let p = pmf(k);
        acc += p;
        remaining -= p;
        k += 1;
        if n * acc >= 5.0 {
            bins.push((lower, n * acc));
            lower = k;
            acc = 0.0;
        }
    }
    // Open right bin {X >= lower}; fold it into its neighbour if too small.
    let mut tail_expected = n * (1.0 - bins.iter().map(|b| b.1).sum::<f64>() / n).max(0.0);
    if tail_expected < 5.0 {
        if let Some((edge, e)) = bins.pop() {
            lower = edge;
            tail_expected += e;
        }
    }
    bins.push((lower, tail_expected));
    if bins.len() < 2 {
        return Err(Error::InsufficientData(
            "too few observations for two bins of expected count 5".into(),
        ));
    }

    let edges: Vec<u64> = bins.iter().map(|b| b.0).collect();
    let mut observed = vec![0.0; bins.len()];
    for &c in counts {
        let idx = edges.partition_point(|&e| e <= c) - 1;
        observed[idx] += 1.0;
    }
    let statistic: f64 = observed
        .iter()
        .zip(&bins)
        .map(|(o, (_, e))| (o - e) * (o - e) / e)
        .sum();
    let dof = bins.len() - 1;
    let chi = ChiSquared::new(dof as f64).map_err(|e| invalid("dof", e.to_string()))?;
    let p_value = chi.sf(statistic);
    Ok(ChiSquareTest {
        statistic,
        dof,
        p_value,
        pass: p_value >= SIGNIFICANCE,
        bins: edges,
    })
}

/// Lag-1 sample autocorrelation.
pub fn lag1_correlation(values: &[f64]) -> f64 {
    let n = values.len();
    if n < 3 {
        return 0.0;
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let var: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    if var == 0.0 {
        return 0.0;
    }
    let cov: f64 = values
        .windows(2)
        .map(|w| (w[0] - mean) * (w[1] - mean))
        .sum();
    cov / var
}

/// Standard error of a binomial proportion estimate.
pub fn binomial_se(p: f64, n: usize) -> f64 {
    (p * (1.0 - p) / n as f64).sqrt()
}
