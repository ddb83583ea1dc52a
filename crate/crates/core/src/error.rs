use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("size mismatch: {left} vs {right}")]
    SizeMismatch { left: usize, right: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("non-finite or negative value in {0}")]
    NonFinite(&'static str),

    #[error("quantile function is not monotone for these parameters")]
    NonMonotone,

    #[error("sinkhorn did not converge in {iterations} iterations (marginal error {error:.3e})")]
    NotConverged { iterations: usize, error: f64 },

    #[error(
        "sampler stalled at iteration {iteration}: {attempts} attempts without acceptance \
         (epsilon {epsilon:.4e}, smallest distance {min_distance:.4e})"
    )]
    Stall {
        iteration: usize,
        attempts: u64,
        epsilon: f64,
        min_distance: f64,
    },

    #[error("no proposal accepted in {draws} draws (epsilon {epsilon:.4e})")]
    NoAcceptance { draws: u64, epsilon: f64 },

    #[error("threshold tuning failed: acceptance {acceptance:.3} at epsilon {epsilon:.4e} (target {target})")]
    TuneFailed {
        epsilon: f64,
        acceptance: f64,
        target: f64,
    },

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("parse error: {0}")]
    Parse(String),
}
