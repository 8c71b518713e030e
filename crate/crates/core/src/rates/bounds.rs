use serde::Serialize;

use crate::error::{invalid, Result};
use crate::rates::RateFunction;

/// One side of a deviation bound: `min(j_term, theta_term)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Exponent {
    /// Infimum of `J` over the relevant half-line.
    pub j_term: f64,
    /// Linear term from the tail of `W`; `+∞` when `θ₀ = +∞`.
    pub theta_term: f64,
    pub value: f64,
}

impl Exponent {
    fn new(j_term: f64, theta_term: f64) -> Self {
        Self {
            j_term,
            theta_term,
            value: j_term.min(theta_term),
        }
    }
}

/// Decay exponents `E` with `P(N_t/t > m + a) ≲ e^{-t E_above}` and
/// `P(N_t/t < m - a) ≲ e^{-t E_below}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DeviationBounds {
    pub above: Exponent,
    pub below: Exponent,
}

/// Upper-bound exponents for deviations of `N_t / t` from its limit `m`.
///
/// With `θ₀ = +∞` these are the plain large-deviation exponents
/// `inf_{z ≥ m+a} J` and `inf_{z ≤ m-a} J`. Otherwise the heavy tail of `W`
/// enters: above `min(inf_{z ≥ m+κa} J, κ'θ₀a)` with `κ + 2κ' = 1`, below
/// `min(inf_{z ≤ m-κa} J, (1-κ)θ₀a)`.
pub fn deviation_bounds(
    rate: &impl RateFunction,
    m: f64,
    a: f64,
    theta0: f64,
    kappa: f64,
    kappa_prime: f64,
) -> Result<DeviationBounds> {
    if !(a > 0.0 && a.is_finite()) {
        return Err(invalid("a", format!("must be positive, got {a}")));
    }
    if !(m > 0.0 && m.is_finite()) {
        return Err(invalid("m", format!("must be positive, got {m}")));
    }
    if theta0.is_infinite() {
        return Ok(DeviationBounds {
            above: Exponent::new(inf_above(rate, m + a, m), f64::INFINITY),
            below: Exponent::new(inf_below(rate, m - a), f64::INFINITY),
        });
    }
    if !(kappa > 0.0 && kappa < 1.0) {
        return Err(invalid("kappa", format!("must lie in (0, 1), got {kappa}")));
    }
    if !(kappa_prime > 0.0 && kappa_prime < 1.0) || (kappa + 2.0 * kappa_prime - 1.0).abs() > 1e-12
    {
        return Err(invalid(
            "kappa_prime",
            format!("need kappa + 2 kappa' = 1 with kappa' in (0, 1), got {kappa_prime}"),
        ));
    }
    Ok(DeviationBounds {
        above: Exponent::new(inf_above(rate, m + kappa * a, m), kappa_prime * theta0 * a),
        below: Exponent::new(inf_below(rate, m - kappa * a), (1.0 - kappa) * theta0 * a),
    })
}

const SCAN: usize = 64;

/// `inf_{z ≥ from} J(z)` by a geometric scan out to `from + 8(m + 1)`,
/// then golden refinement around the best point.
fn inf_above(rate: &impl RateFunction, from: f64, m: f64) -> f64 {
    let span = 8.0 * (m + 1.0);
    let zs: Vec<f64> = (0..SCAN)
        .map(|i| from + span * ((i as f64 / (SCAN - 1) as f64).powi(2)))
        .collect();
    refine_min(rate, &zs)
}

/// `inf_{0 ≤ z ≤ to} J(z)`; `+∞` when the half-line misses `[0, ∞)`.
fn inf_below(rate: &impl RateFunction, to: f64) -> f64 {
    if to < 0.0 {
        return f64::INFINITY;
    }
    let zs: Vec<f64> = (0..SCAN)
        .map(|i| to * (1.0 - (i as f64 / (SCAN - 1) as f64).powi(2)))
        .collect();
    refine_min(rate, &zs)
}

fn refine_min(rate: &impl RateFunction, zs: &[f64]) -> f64 {
    let values: Vec<f64> = zs.iter().map(|&z| rate.rate(z)).collect();
    let (i, mut best) =
        values
            .iter()
            .copied()
            .enumerate()
            .fold(
                (0, f64::INFINITY),
                |acc, (i, v)| if v < acc.1 { (i, v) } else { acc },
            );
    if i == 0 || !best.is_finite() {
        return best;
    }
    let (mut lo, mut hi) = (
        zs[i - 1].min(zs[(i + 1).min(zs.len() - 1)]),
        zs[i - 1].max(zs[(i + 1).min(zs.len() - 1)]),
    );
    for _ in 0..80 {
        let c = hi - 0.618_033_988_749_894_8 * (hi - lo);
        let d = lo + 0.618_033_988_749_894_8 * (hi - lo);
        if rate.rate(c) <= rate.rate(d) {
            hi = d;
        } else {
            lo = c;
        }
    }
    best = best.min(rate.rate(0.5 * (lo + hi)));
    best
}
