use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid kernel: {0}")]
    InvalidKernel(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("event cap of {cap} exceeded before time {time}")]
    RunawaySimulation { cap: usize, time: f64 },

    #[error("no kernel in the coupling dominates the others")]
    NoDominatingKernel,

    #[error(
        "intensity {intensity} of process {process} exceeds dominating rate {bound} at t = {time}"
    )]
    DominationViolated {
        process: usize,
        time: f64,
        intensity: f64,
        bound: f64,
    },

    #[error("not enough data: {0}")]
    InsufficientData(String),

    #[error("time {time} lies beyond the horizon {horizon}")]
    BeyondHorizon { time: f64, horizon: f64 },
}

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
