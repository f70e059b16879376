//! Single-emitter model: optics, photon counting, charge jumps, repump.

pub mod bloch;
pub mod counting;
pub mod g2;
pub mod optics;
pub mod params;
pub mod repump;
pub mod state;

pub use bloch::{bloch_evolve, propagate, rotate, BlochDrive, DensityMatrix};
pub use counting::{probe_with_ionization, sample_counts, ProbeResult};
pub use g2::g2_analytic;
pub use optics::scattering_rate;
pub use params::EmitterParams;
pub use repump::{repump_apply, spectral_jump_sample};
pub use state::{Charge, DriveField, EmitterState};
