//! Exact window laws and limit constants for the solvable kernels.

use serde::Serialize;

use crate::error::{invalid, Result};
use crate::rates::quadrature::GaussLegendre;

/// Canceling kernel `-λ·1[0, A)`: `W ≡ 1` and `τ = A + Exp(λ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CancelOracle {
    pub lambda: f64,
    pub a: f64,
    pub mean_w: f64,
    pub var_w: f64,
    pub mean_tau: f64,
    pub var_tau: f64,
    pub m: f64,
    pub sigma2: f64,
    pub alpha0: f64,
    pub theta0: f64,
}

impl CancelOracle {
    /// `J(z) = λ(1 - zA) - z + z ln(z / (λ(1 - zA)))` on `0 < z < 1/A`,
    /// `+∞` above.
    pub fn rate(&self, z: f64) -> f64 {
        if z < 0.0 {
            return f64::INFINITY;
        }
        let room = 1.0 - z * self.a;
        if room <= 0.0 {
            return f64::INFINITY;
        }
        let free = self.lambda * room;
        if z == 0.0 {
            return free;
        }
        free - z + z * (z / free).ln()
    }

    /// `ln E e^{xτ + yW} = y + xA + ln(λ / (λ - x))` for `x < λ`.
    pub fn log_mgf(&self, x: f64, y: f64) -> f64 {
        if x >= self.lambda {
            return f64::INFINITY;
        }
        y + x * self.a - (-x / self.lambda).ln_1p()
    }
}

pub fn oracle_cancel(lambda: f64, a: f64) -> Result<CancelOracle> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(invalid("lambda", format!("must be positive, got {lambda}")));
    }
    if !(a >= 0.0 && a.is_finite()) {
        return Err(invalid("a", format!("must be nonnegative, got {a}")));
    }
    let mean_tau = a + 1.0 / lambda;
    let var_tau = 1.0 / (lambda * lambda);
    let m = lambda / (1.0 + lambda * a);
    Ok(CancelOracle {
        lambda,
        a,
        mean_w: 1.0,
        var_w: 0.0,
        mean_tau,
        var_tau,
        m,
        sigma2: m * m * var_tau / mean_tau,
        alpha0: lambda,
        theta0: f64::INFINITY,
    })
}

/// Delayed canceling kernel `-λ·1[r, r + A)` with `0 < r < A`.
///
/// After the first jump of a window the intensity stays at `λ` for a time
/// `r`, so `W - 1 ~ Poisson(λr)`, and the window closes `r + A` after its
/// last jump: `τ = r + A + U₁ + X` with `U₁ ~ Exp(λ)` independent of
/// `X = U_W - U₁`, whose law is `e^{-λr} δ₀ + λ e^{-λ(r - t)} dt` on `(0, r]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DelayedOracle {
    pub lambda: f64,
    pub r: f64,
    pub a: f64,
    pub mean_w: f64,
    pub var_w: f64,
    pub mean_tau: f64,
    pub var_tau: f64,
    pub cov_tau_w: f64,
    pub m: f64,
    pub sigma2: f64,
    /// `P(X = 0) = P(W = 1) = e^{-λr}`.
    pub atom: f64,
    /// `E X = r - (1 - e^{-λr}) / λ`.
    pub mean_spread: f64,
    pub alpha0: f64,
    pub theta0: f64,
}

/// Nodes used for the `E[XW]` and joint-MGF integrals over `(0, r]`.
pub(crate) const DELAYED_QUADRATURE_NODES: usize = 48;

pub fn oracle_delayed(lambda: f64, r: f64, a: f64) -> Result<DelayedOracle> {
    oracle_delayed_with(lambda, r, a, &GaussLegendre::new(DELAYED_QUADRATURE_NODES))
}

/// [`oracle_delayed`] with an explicit quadrature rule.
///
/// `Cov(τ, W) = E[XW] - E[X] E[W]` where, from the joint law
/// `P(W = k, X ∈ dt) = e^{-λr} λ^{k-1} t^{k-2} / (k-2)! dt` for `k ≥ 2`,
/// `E[XW] = e^{-λr} ∫₀^r t λ (λt + 2) e^{λt} dt`.
pub fn oracle_delayed_with(
    lambda: f64,
    r: f64,
    a: f64,
    rule: &GaussLegendre,
) -> Result<DelayedOracle> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(invalid("lambda", format!("must be positive, got {lambda}")));
    }
    if !(r > 0.0 && r < a && a.is_finite()) {
        return Err(invalid(
            "r",
            format!("need 0 < r < A, got r = {r}, A = {a}"),
        ));
    }
    let lr = lambda * r;
    let atom = (-lr).exp();
    let mean_spread = r + (-lr).exp_m1() / lambda;
    let var_spread = r * r - 2.0 * mean_spread / lambda - mean_spread * mean_spread;
    let mean_w = 1.0 + lr;
    let var_w = lr;
    let mean_tau = r + a + 1.0 / lambda + mean_spread;
    let var_tau = 1.0 / (lambda * lambda) + var_spread;

    let e_xw = atom
        * rule.integrate(0.0, r, |t| {
            t * lambda * (lambda * t + 2.0) * (lambda * t).exp()
        });
    let cov_tau_w = e_xw - mean_spread * mean_w;

    let m = mean_w / mean_tau;
    let sigma2 = (var_w - 2.0 * m * cov_tau_w + m * m * var_tau) / mean_tau;
    Ok(DelayedOracle {
        lambda,
        r,
        a,
        mean_w,
        var_w,
        mean_tau,
        var_tau,
        cov_tau_w,
        m,
        sigma2,
        atom,
        mean_spread,
        alpha0: lambda,
        theta0: f64::INFINITY,
    })
}

/// Nonnegative kernel with `‖h‖₁ < 1` (linear regime).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LinearOracle {
    pub lambda: f64,
    pub h_l1: f64,
    /// `λ / (1 - ‖h‖₁)`.
    pub mu: f64,
    /// `λ / (1 - ‖h‖₁)³`.
    pub sigma2: f64,
}

impl LinearOracle {
    /// `I(x) = x ln(x / (λ + x‖h‖₁)) - x(1 - ‖h‖₁) + λ`.
    pub fn rate(&self, x: f64) -> f64 {
        if x < 0.0 {
            return f64::INFINITY;
        }
        if x == 0.0 {
            return self.lambda;
        }
        x * (x / (self.lambda + x * self.h_l1)).ln() - x * (1.0 - self.h_l1) + self.lambda
    }
}

pub fn oracle_linear(lambda: f64, h_l1: f64) -> Result<LinearOracle> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(invalid("lambda", format!("must be positive, got {lambda}")));
    }
    if !(0.0..1.0).contains(&h_l1) {
        return Err(invalid("h_l1", format!("must lie in [0, 1), got {h_l1}")));
    }
    let gap = 1.0 - h_l1;
    Ok(LinearOracle {
        lambda,
        h_l1,
        mu: lambda / gap,
        sigma2: lambda / (gap * gap * gap),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Exp};

    #[test]
    fn cancel_examples() {
        let o = oracle_cancel(2.0, 1.0).unwrap();
        assert!((o.m - 2.0 / 3.0).abs() < 1e-15);
        assert!((o.sigma2 - 2.0 / 27.0).abs() < 1e-15);
        assert_eq!(o.mean_tau, 1.5);
        assert_eq!(o.var_tau, 0.25);
        assert!(o.rate(2.0 / 3.0).abs() < 1e-15);
        assert!(o.rate(1.0).is_infinite());
        assert!(o.rate(1.2).is_infinite());
        assert!(oracle_cancel(0.0, 1.0).is_err());
        assert!(oracle_cancel(1.0, -1.0).is_err());

        let p = oracle_cancel(1.0, 0.0).unwrap();
        assert_eq!((p.m, p.sigma2), (1.0, 1.0));
        assert_eq!(p.rate(1.0), 0.0);
        assert!((p.rate(1.5) - (1.0 - 1.5 + 1.5 * 1.5f64.ln())).abs() < 1e-15);
    }

    #[test]
    fn cancel_rate_changes_slope_at_mean() {
        let o = oracle_cancel(2.0, 1.0).unwrap();
        let m = o.m;
        let h = 1e-4;
        assert!(o.rate(m - h) - o.rate(m) > 0.0);
        assert!(o.rate(m + h) - o.rate(m) > 0.0);
        let slope_left = (o.rate(m) - o.rate(m - 2.0 * h)) / (2.0 * h);
        let slope_right = (o.rate(m + 2.0 * h) - o.rate(m)) / (2.0 * h);
        assert!(slope_left < 0.0 && slope_right > 0.0);
    }

    #[test]
    fn delayed_examples() {
        let o = oracle_delayed(1.0, 0.5, 1.0).unwrap();
        assert_eq!(o.mean_w, 1.5);
        assert!((o.mean_tau - 2.606_531).abs() < 5e-7);
        assert!((o.m - 0.575_478).abs() < 5e-7);
        assert!((o.atom - 0.606_531).abs() < 5e-7);
        assert!(o.sigma2 > 0.0);
        assert!(oracle_delayed(1.0, 1.0, 1.0).is_err());
        assert!(oracle_delayed(1.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn delayed_reduces_to_cancel() {
        for (lambda, a) in [(1.0, 1.0), (2.0, 0.5), (0.7, 3.0)] {
            let c = oracle_cancel(lambda, a).unwrap();
            // Every delayed quantity differs from its limit by O(r).
            for r in [1e-6, 1e-10] {
                let d = oracle_delayed(lambda, r, a).unwrap();
                let tol = if r < 1e-9 {
                    1e-9
                } else {
                    10.0 * r * (1.0 + lambda)
                };
                for (x, y) in [
                    (d.mean_w, c.mean_w),
                    (d.var_w, c.var_w),
                    (d.mean_tau, c.mean_tau),
                    (d.var_tau, c.var_tau),
                    (d.cov_tau_w, 0.0),
                    (d.m, c.m),
                    (d.sigma2, c.sigma2),
                ] {
                    assert!((x - y).abs() < tol, "r={r}: {x} vs {y}");
                }
            }
        }
    }

    #[test]
    fn delayed_quadrature_is_resolved() {
        let coarse = oracle_delayed_with(1.0, 0.5, 1.0, &GaussLegendre::new(8)).unwrap();
        let fine = oracle_delayed_with(1.0, 0.5, 1.0, &GaussLegendre::new(64)).unwrap();
        assert!((coarse.cov_tau_w - fine.cov_tau_w).abs() < 1e-13);
        // Closed form of e^{-λr} ∫ t λ (λt + 2) e^{λt} dt for λ = 1:
        // e^{-r} [e^t (t² - 2t + 2) + 2 e^t (t - 1)]₀^r = e^{-r} [e^t t²]₀^r = r².
        let r: f64 = 0.5;
        let exact = r * r - fine.mean_spread * fine.mean_w;
        assert!((fine.cov_tau_w - exact).abs() < 1e-14);
    }

    /// Brute-force the window construction: Poisson(λ) points after the first
    /// jump until a gap exceeds r.
    #[test]
    fn delayed_moments_by_construction() {
        let (lambda, r, a) = (1.0, 0.5, 1.0);
        let o = oracle_delayed(lambda, r, a).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let e = Exp::new(lambda).unwrap();
        let n = 2_000_000usize;
        let (mut st, mut stt, mut sw, mut sww, mut stw) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for _ in 0..n {
            let first: f64 = e.sample(&mut rng);
            let mut last = 0.0;
            let mut w = 1.0;
            loop {
                let next = last + e.sample(&mut rng);
                if next > r {
                    break;
                }
                last = next;
                w += 1.0;
            }
            let tau = r + a + first + last;
            st += tau;
            stt += tau * tau;
            sw += w;
            sww += w * w;
            stw += tau * w;
        }
        let nf = n as f64;
        let mt = st / nf;
        let mw = sw / nf;
        let vt = stt / nf - mt * mt;
        let vw = sww / nf - mw * mw;
        let c = stw / nf - mt * mw;
        assert!((mt - o.mean_tau).abs() < 4.0 * (vt / nf).sqrt());
        assert!((mw - o.mean_w).abs() < 4.0 * (vw / nf).sqrt());
        assert!(
            (vt - o.var_tau).abs() < 0.01 * o.var_tau,
            "{vt} vs {}",
            o.var_tau
        );
        assert!((vw - o.var_w).abs() < 0.01 * o.var_w);
        assert!((c - o.cov_tau_w).abs() < 0.005, "{c} vs {}", o.cov_tau_w);
    }

    #[test]
    fn linear_examples() {
        let o = oracle_linear(1.0, 0.5).unwrap();
        assert_eq!((o.mu, o.sigma2), (2.0, 8.0));
        assert_eq!(o.rate(2.0), 0.0);
        let p = oracle_linear(3.0, 0.0).unwrap();
        assert_eq!((p.mu, p.sigma2), (3.0, 3.0));
        assert_eq!(p.rate(3.0), 0.0);
        assert!(oracle_linear(1.0, 1.0).is_err());
        assert!(oracle_linear(-1.0, 0.5).is_err());
    }
}
