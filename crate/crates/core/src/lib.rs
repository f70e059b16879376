//! Monte Carlo model of a resonantly driven solid-state emitter with a dark
//! charge state, a threshold-counting heralding loop, experiment harnesses
//! and least-squares analysis.

pub mod analysis;
pub mod crc;
pub mod experiments;
pub mod error;
pub mod io;
pub mod physics;
pub mod scalar;

pub use error::{Error, Result};
pub use scalar::Real;

pub type DensityMatrix = physics::bloch::DensityMatrix<f64>;
pub type DensityMatrix32 = physics::bloch::DensityMatrix<f32>;
pub type BlochDrive = physics::bloch::BlochDrive<f64>;
pub type BlochDrive32 = physics::bloch::BlochDrive<f32>;
pub type FitResult = analysis::lsq::FitResult<f64>;
pub type FitResult32 = analysis::lsq::FitResult<f32>;
pub type FitModel = analysis::models::FitModel<f64>;
pub type FitModel32 = analysis::models::FitModel<f32>;
