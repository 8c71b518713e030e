//! Exponential-moment radii, the Cramér transform of `(τ, W)`, the rate
//! function `J` and the closed-form reference cases.

mod bounds;
mod cramer;
mod moments;
mod oracles;
mod quadrature;
mod surface;

pub use bounds::{deviation_bounds, DeviationBounds, Exponent};
pub use cramer::{
    cramer_transform, rate_curve, rate_j, rate_j_scan, CramerValue, RateCurve, RateFlag, RatePoint,
    RateProvenance, RateValue,
};
pub use moments::{alpha0, borel_mgf, theta0, BorelMgf, Theta0, Theta0Method};
pub use oracles::{
    oracle_cancel, oracle_delayed, oracle_linear, CancelOracle, DelayedOracle, LinearOracle,
};
pub use quadrature::GaussLegendre;
pub use surface::{empirical_log_mgf, Domain, LogMgf, LogMgfSurface, SurfaceProvenance};

/// Anything that can evaluate a rate function pointwise.
pub trait RateFunction {
    /// `J(z)`, possibly `+∞`.
    fn rate(&self, z: f64) -> f64;
}

impl<F: Fn(f64) -> f64> RateFunction for F {
    fn rate(&self, z: f64) -> f64 {
        self(z)
    }
}
