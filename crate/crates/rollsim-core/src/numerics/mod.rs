//! Over-determined weighted linear solving, condition-number analysis,
//! first-order optimizers, and shutter-timing calibration from flash banding.

mod calibrate;
mod lstsq;
mod optimize;

pub use calibrate::{calibrate_line_rate, FrameDelayEstimate, LineRateCalibration};
pub use lstsq::{condition_number, solve_least_squares, DesignSystem, LeastSquaresSolution};
pub use optimize::{
    gradient_descent, heavy_ball, objectives, Objective, OptimizerConfig, OptimizerTrace,
};

use thiserror::Error;

/// Relative singular-value threshold below which a system is treated as
/// rank-deficient.
pub const RANK_EPS: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NumericsError {
    #[error("rank-deficient system: sigma_min = {sigma_min:.3e}, sigma_max = {sigma_max:.3e}")]
    RankDeficient { sigma_min: f64, sigma_max: f64 },
    #[error("dimension mismatch: {detail}")]
    DimensionMismatch { detail: String },
    #[error("weights must be finite and non-negative")]
    InvalidWeights,
    #[error("invalid optimizer configuration: {reason}")]
    InvalidConfig { reason: String },
    #[error("iterates diverged at iteration {iteration} (|theta| = {norm:.3e})")]
    Diverged { iteration: usize, norm: f64 },
    #[error("no dominant spectral band (peak {snr_db:.1} dB over floor, need {required_db:.1})")]
    NoDominantBand { snr_db: f64, required_db: f64 },
    #[error("invalid input: {reason}")]
    InvalidInput { reason: String },
}
