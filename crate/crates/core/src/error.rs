use thiserror::Error;

/// Errors raised by the solver layers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid parameter `{name}` = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    /// A retained term of the second-order sum sits on (or next to) a
    /// degeneracy that the chosen effective block does not treat exactly.
    #[error("small denominator {denominator:e} at photon shift p = {p}, oscillator shift P = {big_p}")]
    SmallDenominator { p: i64, big_p: i64, denominator: f64 },

    #[error("truncation leakage: norm {norm} with cutoff `{cutoff}` too small")]
    Truncation { cutoff: &'static str, norm: f64 },

    #[error("Sambe dimension {dimension} exceeds the limit {limit}")]
    DimensionOverflow { dimension: usize, limit: usize },

    #[error("eigensolver failure: {0}")]
    Eigensolver(String),

    #[error("norm drift {drift:e} exceeds tolerance; reduce the step size")]
    StepSize { drift: f64 },

    #[error("configuration error: {0}")]
    Configuration(String),

    #[error("probability {value} at t = {time} outside [0, 1]")]
    ProbabilityRange { time: f64, value: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
