use thiserror::Error;

use crate::linalg::Sys;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not Hermitian (max |m - m^dag| = {deviation:.3e})")]
    NonHermitian { deviation: f64 },

    #[error("matrix is not positive semi-definite (min eigenvalue {min_eigenvalue:.3e})")]
    NotPsd { min_eigenvalue: f64 },

    #[error("matrix is not unitary (max |u^dag u - 1| = {deviation:.3e})")]
    NonUnitary { deviation: f64 },

    #[error("subsystem {0:?} is not part of the layout")]
    UnknownSubsystem(Sys),

    #[error("layout describes dimension {layout} but matrix has dimension {matrix}")]
    LayoutMismatch { layout: usize, matrix: usize },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("{what} = {value} is out of range")]
    OutOfRange { what: &'static str, value: f64 },

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("invalid channel: {0}")]
    InvalidChannel(String),

    #[error("invalid causal map: {0}")]
    InvalidMap(String),

    #[error("expected {expected} data, found {found}")]
    WrongScheme {
        expected: &'static str,
        found: &'static str,
    },

    #[error("distribution is not normalized (worst conditional sum deviates by {deviation:.3e})")]
    NotNormalized { deviation: f64 },

    #[error("correlators depend on the preparation at D (max |C| with t' != 0 is {max_dependence:.3e}, tolerance {tolerance:.3e})")]
    DirectCauseDependence { max_dependence: f64, tolerance: f64 },

    #[error("correlators do not factorize as C_s' * C_t'u' (residual {residual:.3e}, tolerance {tolerance:.3e})")]
    NotFactorizable { residual: f64, tolerance: f64 },

    #[error("marginal P(k|s) is not uniform (max deviation {deviation:.3e}); the statistics signal trivially")]
    SignallingRegime { deviation: f64 },

    #[error("promise violated: {0}")]
    PromiseViolation(String),

    #[error("neither a common-cause nor a direct-cause explanation exists (positivity margin {positivity_margin:.3e}, PPT margin {ppt_margin:.3e})")]
    NoExplanation {
        positivity_margin: f64,
        ppt_margin: f64,
    },

    #[error("n must be positive")]
    ZeroShots,

    #[error("malformed input: {0}")]
    Format(String),
}
