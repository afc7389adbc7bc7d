use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Hard failures. Soft diagnostics (heavy-tail variance, missing plateau,
/// censoring bias and so on) are carried as flags on the result types instead.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("sampled matrix is numerically singular at step {step}")]
    SingularProduct { step: usize },
    #[error("no sign change of log k(s) on [{lo}, {hi}]")]
    NoBracket { lo: f64, hi: f64 },
    #[error("moment curve too noisy at candidate root {alpha}: stderr {stderr} > tol {tol}")]
    NoisyCurve { alpha: f64, stderr: f64, tol: f64 },
    #[error("inconclusive: {0}")]
    Inconclusive(String),

    #[error("backward series did not truncate within {cap} terms")]
    TruncationStall { cap: usize },

    #[error("degenerate tail: top order statistics are equal")]
    DegenerateTail,
    #[error("tail fit has no directional histogram for d = {0}")]
    MissingDirections(usize),

    #[error("no exceedance of level {level}")]
    NoExceedance { level: f64 },

    #[error("rejection sampler acceptance {rate} below 1e-4")]
    RejectionStall { rate: f64 },
    #[error("all {0} hitting times censored")]
    AllCensored(usize),

    #[error("tail index {0} outside (0, 2)")]
    AlphaOutOfRange(f64),
    #[error("regime mismatch: {0}")]
    RegimeMismatch(String),

    #[error("grid operator requires a one-dimensional finite-support law")]
    NotOneDimensional,
    #[error("power iteration did not converge: residual {residual}")]
    NoConvergence { residual: f64 },
    #[error("drift exponent chi = {chi} must be below alpha = {alpha}")]
    ChiTooLarge { chi: f64, alpha: f64 },

    #[error("config error at `{field}`: {message}")]
    Config { field: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}
