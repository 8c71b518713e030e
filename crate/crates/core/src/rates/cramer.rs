//! Cramér transform `Λ*` and rate function `J` of a log-MGF surface.
//!
//! `J(z) = inf_β β Λ*(1/β, z/β)` is computed through its dual form. For
//! fixed `β` the perspective `β Λ*(1/β, z/β)` equals
//! `sup_{x,y} (x + z y - β ψ(x, y))`; exchanging the infimum over `β` with
//! the supremum (the objective is convex in `β`, concave in `(x, y)`) gives
//!
//! ```text
//! J(z) = sup { x + z y : ψ(x, y) ≤ 0 } = sup_y ( z y + x(y) ),
//! ```
//!
//! where `x(y)` solves `ψ(x(y), y) = 0` (ψ increases in `x` since `τ > 0`).
//! The map `y ↦ z y + x(y)` is concave, so a 1-D scan plus golden section
//! finds it; the minimising `β` is the multiplier `1 / ∂ψ/∂x` at the
//! optimum. This form stays exact when `W` is degenerate, where `Λ*` is
//! infinite off a line and a direct scan over `β` can only approach the
//! answer from a kink. [`rate_j_scan`] keeps the direct scan for
//! cross-checking on non-degenerate surfaces.

use serde::Serialize;

use crate::error::{invalid, Result};
use crate::rates::surface::{LogMgfSurface, SurfaceProvenance};
use crate::rates::RateFunction;

const GRID: usize = 64;
const GOLDEN: f64 = 0.618_033_988_749_894_8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum RateFlag {
    Ok,
    /// The optimum sits on the edge of the trusted domain (or, for empirical
    /// surfaces, at an unreliable point); the value is a lower bound at best.
    Truncated,
    Infinite,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CramerValue {
    pub value: f64,
    pub x: f64,
    pub y: f64,
    pub truncated: bool,
}

/// `Λ*(a, b) = sup_{x,y} (a x + b y - ψ(x, y))` over the surface domain.
///
/// A 64×64 grid locates the maximum, then coordinate-wise golden-section
/// sweeps refine it until the objective stops improving.
pub fn cramer_transform(surface: &LogMgfSurface, a: f64, b: f64) -> CramerValue {
    let d = surface.domain();
    let objective = |x: f64, y: f64| {
        let v = a * x + b * y - surface.value(x, y);
        if v.is_nan() {
            f64::NEG_INFINITY
        } else {
            v
        }
    };
    let step_x = (d.x_max - d.x_min) / (GRID - 1) as f64;
    let step_y = (d.y_max - d.y_min) / (GRID - 1) as f64;
    let (mut bx, mut by, mut best) = (0.0, 0.0, objective(0.0, 0.0));
    for i in 0..GRID {
        let x = d.x_min + step_x * i as f64;
        for j in 0..GRID {
            let y = d.y_min + step_y * j as f64;
            let v = objective(x, y);
            if v > best {
                (bx, by, best) = (x, y, v);
            }
        }
    }

    for _ in 0..500 {
        let before = best;
        let (px, py) = (bx, by);
        bx = golden_max(|x| objective(x, by), d.x_min, d.x_max, 1e-12);
        by = golden_max(|y| objective(bx, y), d.y_min, d.y_max, 1e-12);
        best = objective(bx, by);
        // Golden section can land marginally below the incumbent.
        if best < before {
            (bx, by, best) = (px, py, before);
            break;
        }
        if best - before <= 1e-15 * (1.0 + best.abs())
            && (bx - px).abs() <= 1e-8 * (1.0 + bx.abs())
            && (by - py).abs() <= 1e-8 * (1.0 + by.abs())
        {
            break;
        }
    }

    // An optimum on the boundary only matters if the objective still rises
    // towards it; a flat direction (degenerate `W`) is harmless.
    let rising = |near: f64, inward: f64, along_x: bool| {
        if (near).abs() >= 1e-6 {
            return false;
        }
        let v = if along_x {
            objective(bx + inward, by)
        } else {
            objective(bx, by + inward)
        };
        best - v > 1e-9 * (1.0 + best.abs())
    };
    let span_x = d.x_max - d.x_min;
    let span_y = d.y_max - d.y_min;
    let on_edge = rising((bx - d.x_min) / span_x, 1e-3 * span_x, true)
        || rising((d.x_max - bx) / span_x, -1e-3 * span_x, true)
        || rising((by - d.y_min) / span_y, 1e-3 * span_y, false)
        || rising((d.y_max - by) / span_y, -1e-3 * span_y, false);
    CramerValue {
        value: best.max(0.0),
        x: bx,
        y: by,
        truncated: on_edge || !surface.eval(bx, by).reliable,
    }
}

/// Golden-section maximiser of a unimodal function on `[lo, hi]`.
fn golden_max(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, rel_tol: f64) -> f64 {
    let mut c = hi - GOLDEN * (hi - lo);
    let mut d = lo + GOLDEN * (hi - lo);
    let (mut fc, mut fd) = (f(c), f(d));
    let scale = 1.0 + lo.abs().max(hi.abs());
    while hi - lo > rel_tol * scale {
        if fc >= fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - GOLDEN * (hi - lo);
            fc = f(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + GOLDEN * (hi - lo);
            fd = f(d);
        }
    }
    let mid = 0.5 * (lo + hi);
    [(lo, f(lo)), (mid, f(mid)), (hi, f(hi))]
        .into_iter()
        .fold((mid, f64::NEG_INFINITY), |acc, (x, v)| {
            if v > acc.1 {
                (x, v)
            } else {
                acc
            }
        })
        .0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateValue {
    pub z: f64,
    pub j: f64,
    /// Minimising `β` of `β Λ*(1/β, z/β)`.
    pub beta: f64,
    pub x: f64,
    pub y: f64,
    pub flag: RateFlag,
}

/// `x(y)` with `ψ(x(y), y) = 0`, and whether it had to be clipped to the
/// domain.
fn zero_level(surface: &LogMgfSurface, y: f64) -> (f64, bool) {
    let d = surface.domain();
    let (mut lo, mut hi) = (d.x_min, d.x_max);
    let f_lo = surface.value(lo, y);
    if f_lo >= 0.0 {
        return (lo, true);
    }
    let f_hi = surface.value(hi, y);
    if f_hi <= 0.0 {
        return (hi, true);
    }
    // Safeguarded Newton: keep the bracket, fall back to bisection.
    let mut x = if (lo..=hi).contains(&0.0) {
        0.0
    } else {
        0.5 * (lo + hi)
    };
    for _ in 0..300 {
        let (v, dv) = surface.eval_dx(x, y);
        if v == 0.0 {
            return (x, false);
        }
        if v < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let newton = x - v / dv;
        if (newton - x).abs() <= 4.0 * f64::EPSILON * (1.0 + x.abs()) {
            return (newton.clamp(lo, hi), false);
        }
        x = if newton.is_finite() && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if hi - lo <= 4.0 * f64::EPSILON * (1.0 + x.abs()) {
            break;
        }
    }
    (x, false)
}

/// `J(z)` on `surface`; see the module docs for the dual form used.
pub fn rate_j(surface: &LogMgfSurface, z: f64) -> Result<RateValue> {
    if !(z > 0.0 && z.is_finite()) {
        return Err(invalid("z", format!("must be positive, got {z}")));
    }
    let d = surface.domain();
    let profile = |y: f64| {
        let (x, clipped) = zero_level(surface, y);
        // No x in the domain satisfies ψ ≤ 0 at this y.
        if clipped && surface.value(x, y) > 0.0 {
            return (f64::NEG_INFINITY, x, true);
        }
        (z * y + x, x, clipped)
    };

    const SCAN: usize = 129;
    let step = (d.y_max - d.y_min) / (SCAN - 1) as f64;
    let mut best_i = 0;
    let mut best = f64::NEG_INFINITY;
    for i in 0..SCAN {
        let v = profile(d.y_min + step * i as f64).0;
        if v > best {
            best = v;
            best_i = i;
        }
    }
    let lo = d.y_min + step * best_i.saturating_sub(1) as f64;
    let hi = d.y_min + step * (best_i + 1).min(SCAN - 1) as f64;
    let y = golden_max(|y| profile(y).0, lo, hi, 1e-13);
    let (mut j, mut x, clipped) = profile(y);
    let mut y = y;
    // y = 0 gives x = 0 exactly, so J >= 0.
    if j < 0.0 {
        (j, x, y) = (0.0, 0.0, 0.0);
    }

    let edge = 1e-6 * (d.y_max - d.y_min);
    let x_edge = 1e-6 * (d.x_max - d.x_min);
    let truncated = clipped
        || x - d.x_min < x_edge
        || y - d.y_min < edge
        || d.y_max - y < edge
        || !surface.eval(x, y).reliable;
    let beta = 1.0 / surface.eval_dx(x, y).1;
    let flag = if !j.is_finite() {
        RateFlag::Infinite
    } else if truncated {
        RateFlag::Truncated
    } else {
        RateFlag::Ok
    };
    Ok(RateValue {
        z,
        j,
        beta,
        x,
        y,
        flag,
    })
}

/// `J(z)` by direct minimisation of `β Λ*(1/β, z/β)` over a log-spaced
/// 128-point grid of `β` in `[10⁻³, 10³] / E τ`, refined by golden section.
/// Points where `Λ*` is truncated count as `+∞`.
///
/// Each grid point costs a full 2-D transform, so this is meant for analytic
/// surfaces.
pub fn rate_j_scan(surface: &LogMgfSurface, z: f64) -> Result<RateValue> {
    if !(z > 0.0 && z.is_finite()) {
        return Err(invalid("z", format!("must be positive, got {z}")));
    }
    let centre = 1.0 / surface.means().0;
    let perspective = |log_beta: f64| {
        let beta = log_beta.exp();
        let c = cramer_transform(surface, 1.0 / beta, z / beta);
        if c.truncated {
            (f64::INFINITY, c)
        } else {
            (beta * c.value, c)
        }
    };
    const SCAN: usize = 128;
    let (lo, hi) = ((1e-3 * centre).ln(), (1e3 * centre).ln());
    let step = (hi - lo) / (SCAN - 1) as f64;
    let values: Vec<f64> = (0..SCAN)
        .map(|i| perspective(lo + step * i as f64).0)
        .collect();
    let (best_i, best) =
        values
            .iter()
            .copied()
            .enumerate()
            .fold(
                (0, f64::INFINITY),
                |acc, (i, v)| if v < acc.1 { (i, v) } else { acc },
            );
    if !best.is_finite() {
        return Ok(RateValue {
            z,
            j: f64::INFINITY,
            beta: f64::NAN,
            x: f64::NAN,
            y: f64::NAN,
            flag: RateFlag::Infinite,
        });
    }
    let a = lo + step * best_i.saturating_sub(1) as f64;
    let b = lo + step * (best_i + 1).min(SCAN - 1) as f64;
    let log_beta = golden_max(|s| -perspective(s).0, a, b, 1e-10);
    let (j, c) = perspective(log_beta);
    let (j, log_beta, c) = if j <= best {
        (j, log_beta, c)
    } else {
        let s = lo + step * best_i as f64;
        let (v, c) = perspective(s);
        (v, s, c)
    };
    Ok(RateValue {
        z,
        j,
        beta: log_beta.exp(),
        x: c.x,
        y: c.y,
        flag: RateFlag::Ok,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum RateProvenance {
    ClosedForm,
    NumericAnalytic,
    NumericEmpirical,
}

impl RateProvenance {
    pub fn as_str(self) -> &'static str {
        match self {
            RateProvenance::ClosedForm => "closed-form",
            RateProvenance::NumericAnalytic => "numeric-analytic",
            RateProvenance::NumericEmpirical => "numeric-empirical",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RatePoint {
    pub z: f64,
    pub j: f64,
    pub flag: RateFlag,
}

/// Tabulated `(z, J(z))`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateCurve {
    pub provenance: RateProvenance,
    pub points: Vec<RatePoint>,
}

impl RateCurve {
    pub fn closed_form(grid: &[f64], rate: impl RateFunction) -> Self {
        Self {
            provenance: RateProvenance::ClosedForm,
            points: grid
                .iter()
                .map(|&z| {
                    let j = rate.rate(z);
                    RatePoint {
                        z,
                        j,
                        flag: if j.is_finite() {
                            RateFlag::Ok
                        } else {
                            RateFlag::Infinite
                        },
                    }
                })
                .collect(),
        }
    }
}

/// Numeric `J` over `grid`.
pub fn rate_curve(surface: &LogMgfSurface, grid: &[f64]) -> Result<RateCurve> {
    let provenance = match surface.provenance() {
        SurfaceProvenance::Analytic => RateProvenance::NumericAnalytic,
        SurfaceProvenance::Empirical => RateProvenance::NumericEmpirical,
    };
    let points = grid
        .iter()
        .map(|&z| {
            rate_j(surface, z).map(|r| RatePoint {
                z,
                j: r.j,
                flag: r.flag,
            })
        })
        .collect::<Result<_>>()?;
    Ok(RateCurve { provenance, points })
}

impl RateFunction for LogMgfSurface {
    fn rate(&self, z: f64) -> f64 {
        match rate_j(self, z) {
            Ok(r) if r.flag == RateFlag::Ok => r.j,
            Ok(r) if r.flag == RateFlag::Truncated => r.j,
            _ => f64::INFINITY,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rates::oracles::oracle_cancel;

    #[test]
    fn transform_vanishes_at_mean() {
        let s = LogMgfSurface::canceling(2.0, 1.0).unwrap();
        let c = cramer_transform(&s, 1.5, 1.0);
        assert!(c.value < 1e-6, "{c:?}");
        assert!(!c.truncated);

        let d = LogMgfSurface::delayed(1.0, 0.5, 1.0).unwrap();
        let (mt, mw) = d.means();
        let c = cramer_transform(&d, mt, mw);
        assert!(c.value < 1e-6, "{c:?}");
    }

    #[test]
    fn poisson_window_transform() {
        let s = LogMgfSurface::canceling(1.0, 0.0).unwrap();
        let c = cramer_transform(&s, 2.0, 1.0);
        assert!((c.value - (1.0 - 2f64.ln())).abs() < 1e-9, "{c:?}");
        assert!((c.x - 0.5).abs() < 1e-5);
    }

    #[test]
    fn degenerate_count_is_truncated_off_its_line() {
        let s = LogMgfSurface::canceling(1.0, 0.0).unwrap();
        let c = cramer_transform(&s, 2.0, 1.5);
        assert!(c.truncated);
        assert!(c.value > 100.0);
    }

    #[test]
    fn golden_finds_parabola_peak() {
        let x = golden_max(|x| -(x - 0.3) * (x - 0.3), -10.0, 10.0, 1e-13);
        assert!((x - 0.3).abs() < 1e-9);
    }

    #[test]
    fn rate_matches_cancel_closed_form() {
        let s = LogMgfSurface::canceling(2.0, 1.0).unwrap();
        let o = oracle_cancel(2.0, 1.0).unwrap();
        for i in 1..=9 {
            let z = i as f64 / 10.0;
            let r = rate_j(&s, z).unwrap();
            assert_eq!(r.flag, RateFlag::Ok);
            assert!(
                (r.j - o.rate(z)).abs() < 1e-6,
                "z={z}: {} vs {}",
                r.j,
                o.rate(z)
            );
            // For W ≡ 1 the only finite perspective is at β = z.
            assert!((r.beta - z).abs() < 1e-6);
        }
        let at_mean = rate_j(&s, o.m).unwrap();
        assert!(at_mean.j < 1e-6);
    }

    #[test]
    fn rate_beyond_dead_time_limit_is_flagged() {
        let s = LogMgfSurface::canceling(2.0, 1.0).unwrap();
        let r = rate_j(&s, 1.2).unwrap();
        assert_ne!(r.flag, RateFlag::Ok);
    }

    #[test]
    fn poisson_rate() {
        let s = LogMgfSurface::canceling(1.0, 0.0).unwrap();
        let r = rate_j(&s, 1.5).unwrap();
        assert!((r.j - 0.108_198).abs() < 5e-7, "{r:?}");
        assert!(rate_j(&s, 0.0).is_err());
    }

    #[test]
    fn scan_agrees_with_dual_on_delayed_surface() {
        let s = LogMgfSurface::delayed(1.0, 0.5, 1.0).unwrap();
        for z in [0.35, 0.575_478, 0.8] {
            let dual = rate_j(&s, z).unwrap();
            let scan = rate_j_scan(&s, z).unwrap();
            assert_eq!(dual.flag, RateFlag::Ok);
            assert!(
                (dual.j - scan.j).abs() < 1e-5,
                "z={z}: {} vs {}",
                dual.j,
                scan.j
            );
            assert!((dual.beta - scan.beta).abs() < 1e-2 * dual.beta);
        }
    }

    #[test]
    fn delayed_rate_is_convex_and_vanishes_at_mean() {
        let s = LogMgfSurface::delayed(1.0, 0.5, 1.0).unwrap();
        let m = s.limit_rate();
        assert!(rate_j(&s, m).unwrap().j < 1e-6);
        let zs: Vec<f64> = (1..=24).map(|i| 0.1 * i as f64).collect();
        let js: Vec<f64> = zs.iter().map(|&z| rate_j(&s, z).unwrap().j).collect();
        for w in js.windows(3) {
            assert!(w[1] <= 0.5 * (w[0] + w[2]) + 1e-6);
        }
        assert!(js.iter().all(|&j| j >= 0.0));
    }
}
