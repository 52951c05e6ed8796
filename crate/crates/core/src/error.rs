use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("operators live on different spaces: {left:?} vs {right:?}")]
    SpaceMismatch { left: Vec<usize>, right: Vec<usize> },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("invalid time grid: {0}")]
    InvalidGrid(String),

    #[error(
        "amplifier truncation breached at t = {time:.4}: population {population:.3e} in the top two \
         levels exceeds {tolerance:.1e}; raise n_c (currently {n_c}, try {suggested})"
    )]
    TruncationBreach {
        time: f64,
        population: f64,
        tolerance: f64,
        n_c: usize,
        suggested: usize,
    },

    #[error("integration failed at t = {time:.6}: step size {step:.3e} underflowed")]
    StepSizeUnderflow { time: f64, step: f64 },

    #[error("integration failed at t = {time:.6}: exceeded {max_steps} steps")]
    TooManySteps { time: f64, max_steps: usize },

    #[error("steady state not reached: max deviation {max_deviation:.3e} over the final window exceeds {tolerance:.1e}")]
    NotConverged { max_deviation: f64, tolerance: f64 },

    #[error("grid too coarse: {points_per_unit:.2} points per 1/Gamma, need at least {required}")]
    GridTooCoarse { points_per_unit: f64, required: f64 },

    #[error("quadrature did not converge: estimated error {error:.3e} above tolerance {tolerance:.1e}")]
    Quadrature { error: f64, tolerance: f64 },
}
