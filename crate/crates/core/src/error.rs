use thiserror::Error;

/// Errors raised across the solver and verification pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("grid too coarse: axis {axis} has {points} points, needs at least {required} for max mode index {max_index}")]
    Aliasing {
        axis: usize,
        points: usize,
        required: usize,
        max_index: usize,
    },

    #[error("domain mismatch: {0}")]
    DomainMismatch(String),

    #[error("time {t} outside [0, {horizon}]")]
    TimeOutOfRange { t: f64, horizon: f64 },

    #[error("exchange-correlation model failed: {0}")]
    XcEvaluation(String),

    #[error("step matrix singular at step {step} (t = {t}, dt = {dt})")]
    LinearSolve { step: usize, t: f64, dt: f64 },

    #[error("inner fixed point did not converge at step {step} (t = {t}) after {iterations} iterations, last update {last_update:e}")]
    InnerFixedPoint {
        step: usize,
        t: f64,
        iterations: usize,
        last_update: f64,
    },

    #[error("Picard iteration did not reach tol {tol:e} in {iterations} iterations; ratio history {ratios:?}")]
    PicardNonConvergence {
        tol: f64,
        iterations: usize,
        ratios: Vec<f64>,
    },

    #[error("covering schedule underflow at step {k}: subinterval length {length:e} (constants too pessimistic for this problem)")]
    ScheduleUnderflow { k: usize, length: f64 },

    #[error("time grids differ: {0}")]
    TimeGridMismatch(String),

    #[error("config hash mismatch: trajectory {found}, config {expected}")]
    HashMismatch { expected: String, found: String },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
