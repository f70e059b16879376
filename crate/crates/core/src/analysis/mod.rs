//! Curve fitting and count statistics.

pub mod fits;
pub mod lsq;
pub mod models;
pub mod stats;

pub use fits::{
    fit_damped_sine, fit_g2, fit_gaussian_envelope, fit_lorentzian, fit_phase_fringe, EnvelopeOptions,
    PeakOptions,
};
pub use lsq::{fit_least_squares, FitResult, FitStatus, LmOptions};
pub use models::{FitModel, ModelKind};
pub use stats::{center_statistics, correlation_metrics, pearson};
