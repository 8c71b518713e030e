use serde::Serialize;
use statrs::function::gamma::ln_gamma;

use crate::error::{invalid, Result};
use crate::kernel::Kernel;

/// Radius `α₀` below which `E e^{α τ₁}` is finite:
/// `min(λ, (ν - ln ν - 1) / L)` with `ν = ‖h⁺‖₁`, or `λ` when `ν = 0`.
pub fn alpha0(kernel: &Kernel, lambda: f64) -> f64 {
    let nu = kernel.positive_l1();
    if nu <= 0.0 {
        return lambda;
    }
    lambda.min(branching_radius(nu) / kernel.support())
}

/// `ν - ln ν - 1`, the radius of convergence of the Borel moment generating
/// function.
fn branching_radius(nu: f64) -> f64 {
    nu - nu.ln() - 1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum BorelMgf {
    Finite(f64),
    Divergent,
}

impl BorelMgf {
    pub fn value(self) -> f64 {
        match self {
            BorelMgf::Finite(v) => v,
            BorelMgf::Divergent => f64::INFINITY,
        }
    }
}

const BOREL_TERM_CAP: u64 = 10_000_000;

/// `E e^{θ S}` for `S` Borel(ν), the total progeny of a Poisson(ν)
/// Galton–Watson tree: `Σ_{k≥1} e^{θk} e^{-kν} (kν)^{k-1} / k!`.
///
/// Summation stops once the geometric estimate of the remainder falls below
/// `tolerance` times the partial sum.
pub fn borel_mgf(nu: f64, theta: f64, tolerance: f64) -> Result<BorelMgf> {
    if !(nu > 0.0 && nu < 1.0) {
        return Err(invalid("nu", format!("must lie in (0, 1), got {nu}")));
    }
    if !(tolerance > 0.0) {
        return Err(invalid(
            "tolerance",
            format!("must be positive, got {tolerance}"),
        ));
    }
    if theta >= branching_radius(nu) {
        return Ok(BorelMgf::Divergent);
    }
    let log_term = |k: f64| theta * k - k * nu + (k - 1.0) * (k * nu).ln() - ln_gamma(k + 1.0);
    let mut sum = 0.0;
    let mut prev = f64::NAN;
    for k in 1..=BOREL_TERM_CAP {
        let term = log_term(k as f64).exp();
        sum += term;
        if k > 1 {
            let ratio = term / prev;
            if ratio < 1.0 && term / (1.0 - ratio) < tolerance * sum {
                return Ok(BorelMgf::Finite(sum));
            }
        }
        prev = term;
    }
    Ok(BorelMgf::Divergent)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Theta0Method {
    /// Every jump silences the process for the whole support: `W ≡ 1`.
    Canceling,
    /// `h ≤ 0`: comparison with a rate-λ Poisson process.
    PureInhibition,
    /// `‖h⁺‖₁ > 0`: comparison with a Borel-distributed queue.
    Branching,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Theta0 {
    pub value: f64,
    pub method: Theta0Method,
}

/// A radius `θ₀` such that `E e^{θ W₁} < ∞` for `θ < θ₀`.
pub fn theta0(kernel: &Kernel, lambda: f64) -> Theta0 {
    if kernel.is_canceling(lambda) {
        return Theta0 {
            value: f64::INFINITY,
            method: Theta0Method::Canceling,
        };
    }
    if kernel.positive_l1() <= 0.0 {
        // For h ≡ 0 (L = 0) this is +∞, consistent with W ≡ 1.
        let value = -(-(-lambda * kernel.support()).exp()).ln_1p();
        return Theta0 {
            value,
            method: Theta0Method::PureInhibition,
        };
    }

    let nu = kernel.positive_l1();
    let alpha = alpha0(kernel, lambda);
    // E e^{2θS} must be finite, so the search stays below half the radius.
    let satisfied = |theta: f64| match borel_mgf(nu, 2.0 * theta, 1e-14) {
        Ok(BorelMgf::Finite(v)) => lambda * (v - 1.0) < alpha,
        _ => false,
    };
    let (mut lo, mut hi) = (0.0, 0.5 * branching_radius(nu));
    if satisfied(hi * (1.0 - 1e-12)) {
        lo = hi;
    }
    while hi - lo > 1e-9 * hi {
        let mid = 0.5 * (lo + hi);
        if satisfied(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Theta0 {
        value: lo,
        method: Theta0Method::Branching,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Poisson};

    #[test]
    fn alpha0_examples() {
        let k = Kernel::boxcar(0.5, 1.0).unwrap();
        assert!((alpha0(&k, 10.0) - 0.193_147).abs() < 5e-7);
        assert_eq!(alpha0(&Kernel::canceling(2.0, 1.0).unwrap(), 2.0), 2.0);
        assert_eq!(alpha0(&Kernel::zero(), 3.0), 3.0);
        let near_critical = Kernel::boxcar(0.999_999, 1.0).unwrap();
        let a = alpha0(&near_critical, 1.0);
        assert!(a > 0.0 && a < 1e-11);
    }

    #[test]
    fn borel_normalisation_and_monotonicity() {
        for nu in [0.1, 0.5, 0.9] {
            let one = borel_mgf(nu, 0.0, 1e-15).unwrap().value();
            assert!((one - 1.0).abs() < 1e-10, "nu={nu}: {one}");
            let radius = branching_radius(nu);
            let mut prev = 0.0;
            for i in 0..20 {
                let th = -0.5 + (radius + 0.5) * i as f64 / 20.0;
                let v = borel_mgf(nu, th, 1e-14).unwrap().value();
                assert!(v >= prev);
                prev = v;
            }
        }
    }

    #[test]
    fn borel_divergence_and_errors() {
        assert_eq!(borel_mgf(0.5, 0.3, 1e-12).unwrap(), BorelMgf::Divergent);
        assert!(borel_mgf(0.0, 0.1, 1e-12).is_err());
        assert!(borel_mgf(1.0, 0.1, 1e-12).is_err());
        assert!(borel_mgf(0.5, 0.1, 0.0).is_err());
    }

    #[test]
    fn borel_mean_is_one_over_one_minus_nu() {
        // d/dθ at 0 gives E S = 1 / (1 - ν).
        let h = 1e-6;
        let up = borel_mgf(0.5, h, 1e-15).unwrap().value();
        let down = borel_mgf(0.5, -h, 1e-15).unwrap().value();
        assert!(((up - down) / (2.0 * h) - 2.0).abs() < 1e-6);
    }

    #[test]
    fn borel_against_galton_watson() {
        // Total progeny of a Poisson(0.5) Galton–Watson tree.
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let offspring = Poisson::new(0.5).unwrap();
        let n = 1_000_000;
        let (mut s1, mut s2) = (0.0, 0.0);
        for _ in 0..n {
            let (mut alive, mut total) = (1u64, 1u64);
            while alive > 0 {
                let mut next = 0u64;
                for _ in 0..alive {
                    next += offspring.sample(&mut rng) as u64;
                }
                total += next;
                alive = next;
            }
            let v = (0.1 * total as f64).exp();
            s1 += v;
            s2 += v * v;
        }
        let mean = s1 / n as f64;
        let se = ((s2 / n as f64 - mean * mean) / n as f64).sqrt();
        let exact = borel_mgf(0.5, 0.1, 1e-15).unwrap().value();
        assert!(
            (mean - exact).abs() < 3.0 * se,
            "mc {mean} ± {se}, series {exact}"
        );
    }

    #[test]
    fn theta0_examples() {
        let inhibit = Kernel::new([(0.0, 1.0, -1.0)]).unwrap();
        let t = theta0(&inhibit, 2.0);
        assert_eq!(t.method, Theta0Method::PureInhibition);
        assert!((t.value - 0.145_413).abs() < 5e-7, "{}", t.value);

        let cancel = Kernel::canceling(2.0, 1.0).unwrap();
        let t = theta0(&cancel, 2.0);
        assert_eq!(t.method, Theta0Method::Canceling);
        assert!(t.value.is_infinite());

        assert!(theta0(&Kernel::zero(), 1.0).value.is_infinite());
    }

    #[test]
    fn theta0_branching_satisfies_constraints() {
        let k = Kernel::boxcar(0.5, 1.0).unwrap();
        let t = theta0(&k, 1.0);
        assert_eq!(t.method, Theta0Method::Branching);
        let a0 = alpha0(&k, 1.0);
        assert!(t.value > 0.0 && t.value < 0.193_147);
        assert!(t.value < 0.5 - 0.5f64.ln() - 1.0);
        let at = borel_mgf(0.5, 2.0 * t.value, 1e-15).unwrap().value();
        assert!(1.0 * (at - 1.0) < a0);
        // Just above the returned point the second constraint fails.
        let above = borel_mgf(0.5, 2.0 * t.value * (1.0 + 1e-6), 1e-15)
            .unwrap()
            .value();
        assert!(1.0 * (above - 1.0) >= a0 * (1.0 - 1e-5));
    }
}
