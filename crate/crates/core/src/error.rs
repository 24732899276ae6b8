use thiserror::Error;

/// Errors raised by the laboratory.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum LabError {
    #[error("invalid measure: {0}")]
    InvalidMeasure(String),

    #[error("invalid density sequence: {0}")]
    InvalidDensity(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("rejection sampler exceeded {cap} iterations at site {site}")]
    RejectionCap { site: i64, cap: u64 },

    #[error("value {value} at site {site} lies outside the support of the base measure")]
    OutsideSupport { site: i64, value: f64 },

    #[error("resonant energy {energy}: too close to the spectrum of the box [{lo}, {hi}]")]
    ResonantEnergy { energy: f64, lo: i64, hi: i64 },

    #[error("site range [{lo}, {hi}] is not contained in the window [{window_lo}, {window_hi}]")]
    OutOfWindow {
        lo: i64,
        hi: i64,
        window_lo: i64,
        window_hi: i64,
    },

    #[error("inverse iteration failed to converge for shift {shift}")]
    InverseIteration { shift: f64 },

    #[error("i/o error at {path}: {message}")]
    Io { path: String, message: String },

    #[error("serialization error: {0}")]
    Serialization(String),
}

pub type Result<T, E = LabError> = std::result::Result<T, E>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> LabError {
    LabError::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
