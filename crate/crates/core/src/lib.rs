//! Simulation and renewal analysis of Hawkes point processes whose
//! reproduction kernel is signed (self-excitation plus inhibition) and
//! compactly supported.
//!
//! The crate is organised bottom-up:
//!
//! - [`kernel`]: piecewise-constant signed kernels and their functionals.
//! - [`engine`]: exact thinning simulation, optionally coupling several
//!   kernels through one shared candidate stream.
//! - [`renewal`]: decomposition of a path into i.i.d. regeneration windows.
//! - [`estimators`]: law-of-large-numbers / CLT estimates and goodness-of-fit.
//! - [`rates`]: exponential-moment radii, Cramér transform, rate function
//!   and the closed-form reference cases.

pub mod engine;
pub mod error;
pub mod estimators;
pub mod kernel;
pub mod rates;
pub mod renewal;

pub use engine::{simulate, simulate_coupled, EventStream, SimConfig};
pub use error::{Error, Result};
pub use kernel::{Kernel, Segment};
pub use renewal::{decompose, sample_windows, RenewalWindow, WindowSample};
