//! Joint log-moment generating functions `ψ(x, y) = ln E e^{xτ + yW}`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::kernel::Kernel;
use crate::rates::moments::{alpha0, theta0};
use crate::rates::oracles::{oracle_cancel, oracle_delayed, CancelOracle, DelayedOracle};
use crate::renewal::WindowSample;

/// Box on which a surface is trusted. Optimisers never leave it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Domain {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl Domain {
    pub fn contains(&self, x: f64, y: f64) -> bool {
        (self.x_min..=self.x_max).contains(&x) && (self.y_min..=self.y_max).contains(&y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SurfaceProvenance {
    Analytic,
    Empirical,
}

/// A surface value; `reliable` is false outside the domain or, for empirical
/// surfaces, where a single window carries more than half the mass.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogMgf {
    pub value: f64,
    pub reliable: bool,
}

#[derive(Debug, Clone)]
enum Model {
    Canceling(CancelOracle),
    Delayed(DelayedOracle),
    Empirical { taus: Vec<f64>, ws: Vec<f64> },
}

#[derive(Debug, Clone)]
pub struct LogMgfSurface {
    model: Model,
    domain: Domain,
    mean_tau: f64,
    mean_w: f64,
}

/// Half-width of the analytic domains in the unbounded directions.
const ANALYTIC_REACH: f64 = 1e3;
/// Empirical domains are searched up to this many multiples of `1 / E τ`
/// (in x) and units (in y).
const EMPIRICAL_REACH: f64 = 1e3;
/// Single-window mass share above which an empirical value is unreliable.
const MAX_SHARE: f64 = 0.5;

impl LogMgfSurface {
    /// Canceling kernel `-λ·1[0, A)`; `A = 0` is the Poisson window law
    /// `τ ~ Exp(λ)`, `W ≡ 1`.
    pub fn canceling(lambda: f64, a: f64) -> Result<Self> {
        let o = oracle_cancel(lambda, a)?;
        Ok(Self {
            domain: Domain {
                x_min: -ANALYTIC_REACH * lambda.max(1.0),
                x_max: lambda,
                y_min: -ANALYTIC_REACH,
                y_max: ANALYTIC_REACH,
            },
            mean_tau: o.mean_tau,
            mean_w: o.mean_w,
            model: Model::Canceling(o),
        })
    }

    /// Delayed canceling kernel `-λ·1[r, r + A)`.
    ///
    /// With `c = x + λ e^y` the joint transform of `(X, W)` is
    /// `e^{-λr} (e^y + λ e^{2y} (e^{cr} - 1) / c)`, obtained by summing the
    /// joint law `P(W = k, X ∈ dt)` over `k` and integrating in `t`.
    pub fn delayed(lambda: f64, r: f64, a: f64) -> Result<Self> {
        let o = oracle_delayed(lambda, r, a)?;
        Ok(Self {
            domain: Domain {
                x_min: -ANALYTIC_REACH * lambda.max(1.0),
                x_max: lambda,
                y_min: -50.0,
                y_max: 50.0,
            },
            mean_tau: o.mean_tau,
            mean_w: o.mean_w,
            model: Model::Delayed(o),
        })
    }

    pub fn provenance(&self) -> SurfaceProvenance {
        match self.model {
            Model::Empirical { .. } => SurfaceProvenance::Empirical,
            _ => SurfaceProvenance::Analytic,
        }
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    /// `(E τ, E W)`.
    pub fn means(&self) -> (f64, f64) {
        (self.mean_tau, self.mean_w)
    }

    /// `E W / E τ`.
    pub fn limit_rate(&self) -> f64 {
        self.mean_w / self.mean_tau
    }

    pub fn value(&self, x: f64, y: f64) -> f64 {
        self.eval(x, y).value
    }

    pub fn eval(&self, x: f64, y: f64) -> LogMgf {
        let inside = self.domain.contains(x, y);
        match &self.model {
            Model::Canceling(o) => LogMgf {
                value: o.log_mgf(x, y),
                reliable: inside,
            },
            Model::Delayed(o) => LogMgf {
                value: delayed_log_mgf(o, x, y),
                reliable: inside,
            },
            Model::Empirical { taus, ws } => {
                let (value, share, _) = empirical_terms(taus, ws, x, y, false);
                LogMgf {
                    value,
                    reliable: inside && share <= MAX_SHARE,
                }
            }
        }
    }

    /// `(ψ, ∂ψ/∂x)`.
    pub fn eval_dx(&self, x: f64, y: f64) -> (f64, f64) {
        match &self.model {
            Model::Canceling(o) => {
                if x >= o.lambda {
                    (f64::INFINITY, f64::INFINITY)
                } else {
                    (o.log_mgf(x, y), o.a + 1.0 / (o.lambda - x))
                }
            }
            Model::Delayed(o) => {
                let v = delayed_log_mgf(o, x, y);
                let h = 1e-6 * x.abs().max(1.0);
                let up = delayed_log_mgf(o, x + h, y);
                let down = delayed_log_mgf(o, x - h, y);
                (v, (up - down) / (2.0 * h))
            }
            Model::Empirical { taus, ws } => {
                let (v, _, d) = empirical_terms(taus, ws, x, y, true);
                (v, d)
            }
        }
    }
}

fn delayed_log_mgf(o: &DelayedOracle, x: f64, y: f64) -> f64 {
    if x >= o.lambda {
        return f64::INFINITY;
    }
    let (lambda, r) = (o.lambda, o.r);
    let c = x + lambda * y.exp();
    // ln ∫₀^r e^{ct} dt, kept finite for large |c| r.
    let ln_integral = if c == 0.0 {
        r.ln()
    } else if c > 0.0 {
        c * r + (-(-c * r).exp_m1() / c).ln()
    } else {
        ((c * r).exp_m1() / c).ln()
    };
    let spread = log_add_exp(y, lambda.ln() + 2.0 * y + ln_integral) - lambda * r;
    x * (r + o.a) - (-x / lambda).ln_1p() + spread
}

fn log_add_exp(a: f64, b: f64) -> f64 {
    let hi = a.max(b);
    if hi == f64::NEG_INFINITY {
        return hi;
    }
    hi + ((a - hi).exp() + (b - hi).exp()).ln()
}

/// `(ln mean e^{xτ+yW}, largest single share, tilted mean of τ)`.
fn empirical_terms(taus: &[f64], ws: &[f64], x: f64, y: f64, with_dx: bool) -> (f64, f64, f64) {
    let top = taus
        .iter()
        .zip(ws)
        .map(|(&t, &w)| x * t + y * w)
        .fold(f64::NEG_INFINITY, f64::max);
    let (mut sum, mut dx) = (0.0, 0.0);
    for (&t, &w) in taus.iter().zip(ws) {
        let e = (x * t + y * w - top).exp();
        sum += e;
        if with_dx {
            dx += e * t;
        }
    }
    let value = top + (sum / taus.len() as f64).ln();
    (value, 1.0 / sum, dx / sum)
}

/// Empirical `ψ` of the windows in `sample`.
///
/// The trusted domain is cut where one window would hold more than half of
/// the empirical mass along either axis. When the sample records its kernel
/// and `λ`, the x-range is further capped at `α₀` and the y-range at `θ₀`,
/// beyond which the true transform may be infinite.
pub fn empirical_log_mgf(sample: &WindowSample) -> Result<LogMgfSurface> {
    let n = sample.len();
    if n < 1000 {
        return Err(Error::InsufficientData(format!(
            "an empirical surface needs at least 1000 windows, got {n}"
        )));
    }
    let taus = sample.taus();
    let ws: Vec<f64> = sample.counts().into_iter().map(|w| w as f64).collect();
    let mean_tau = taus.iter().sum::<f64>() / n as f64;
    let mean_w = ws.iter().sum::<f64>() / n as f64;

    let share = |x: f64, y: f64| empirical_terms(&taus, &ws, x, y, false).1;
    let reach_x = EMPIRICAL_REACH / mean_tau;
    let mut domain = Domain {
        x_min: -axis_cap(|s| share(-s, 0.0), reach_x),
        x_max: axis_cap(|s| share(s, 0.0), reach_x),
        y_min: -axis_cap(|s| share(0.0, -s), EMPIRICAL_REACH),
        y_max: axis_cap(|s| share(0.0, s), EMPIRICAL_REACH),
    };

    let prov = &sample.provenance;
    if let (Some(lambda), Some(segments)) = (prov.lambda, prov.kernel.as_ref()) {
        let kernel = Kernel::new(segments.iter().copied())?;
        domain.x_max = domain.x_max.min(alpha0(&kernel, lambda));
        domain.y_max = domain.y_max.min(theta0(&kernel, lambda).value);
    }

    Ok(LogMgfSurface {
        model: Model::Empirical { taus, ws },
        domain,
        mean_tau,
        mean_w,
    })
}

/// Largest `s` in `[0, reach]` with `share(s) <= MAX_SHARE`, assuming the
/// share grows with `s`.
fn axis_cap(share: impl Fn(f64) -> f64, reach: f64) -> f64 {
    if share(reach) <= MAX_SHARE {
        return reach;
    }
    let (mut lo, mut hi) = (0.0, reach);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if share(mid) <= MAX_SHARE {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}
