use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("signal needs at least {min} samples, got {got}")]
    TooShort { min: usize, got: usize },

    #[error("sample rate must be positive and finite, got {0}")]
    InvalidSampleRate(f64),

    #[error("sample {index} is not finite")]
    NonFinite { index: usize },

    #[error("all samples are equal; variance is zero")]
    ZeroVariance,

    #[error("signal power is zero")]
    ZeroPower,

    #[error("too few extrema to build an envelope ({0} knots)")]
    TooFewExtrema(usize),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("circulant embedding of size {size} exceeds the cap of {cap}")]
    LengthTooLarge { size: usize, cap: usize },

    #[error("digamma is undefined at x = {0}")]
    Domain(f64),

    #[error("need more than k + 1 = {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },

    #[error("{zero_radius} of {n} points have a zero neighbour radius")]
    DegenerateData { zero_radius: usize, n: usize },

    #[error("every IMF has zero variance")]
    AllDegenerate,

    #[error("target {target_hz} Hz is at or above Nyquist ({nyquist_hz} Hz)")]
    TargetAboveNyquist { target_hz: f64, nyquist_hz: f64 },

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
}
