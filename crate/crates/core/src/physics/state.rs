use crate::error::{Error, Result};
use crate::physics::bloch::{BlochDrive, DensityMatrix};
use crate::physics::params::EmitterParams;

/// Charge configuration of the emitter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Charge {
    Bright,
    Dark,
}

/// Mutable per-shot state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmitterState {
    pub charge: Charge,
    /// Transition frequency minus nominal, MHz.
    pub center_detuning: f64,
    pub rho: DensityMatrix<f64>,
}

impl EmitterState {
    pub fn bright(center_detuning: f64) -> Self {
        Self {
            charge: Charge::Bright,
            center_detuning,
            rho: DensityMatrix::ground_state(),
        }
    }

    pub fn dark() -> Self {
        Self {
            charge: Charge::Dark,
            center_detuning: 0.0,
            rho: DensityMatrix::ground_state(),
        }
    }

    pub fn is_bright(&self) -> bool {
        self.charge == Charge::Bright
    }

    /// Detuning of a laser at `laser` MHz (relative to nominal) from this
    /// emitter, laser minus emitter.
    pub fn laser_detuning(&self, laser: f64) -> f64 {
        laser - self.center_detuning
    }
}

/// A drive pulse as seen by the emitter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriveField {
    /// Laser frequency minus current emitter center, MHz.
    pub detuning_from_emitter: f64,
    /// nW.
    pub power: f64,
    /// Ordinary Rabi frequency Ω/2π, MHz.
    pub rabi_frequency: f64,
    /// rad.
    pub phase: f64,
    /// ns.
    pub duration: f64,
}

impl DriveField {
    pub fn new(
        params: &EmitterParams,
        detuning_from_emitter: f64,
        power: f64,
        phase: f64,
        duration: f64,
    ) -> Result<Self> {
        if !(power >= 0.0) || !power.is_finite() {
            return Err(Error::InvalidArgument(format!("drive power must be >= 0, got {power}")));
        }
        if !(duration >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "drive duration must be >= 0, got {duration}"
            )));
        }
        Ok(Self {
            detuning_from_emitter,
            power,
            rabi_frequency: params.rabi_frequency(power),
            phase,
            duration,
        })
    }

    pub fn saturation(&self, params: &EmitterParams) -> f64 {
        params.saturation(self.power)
    }

    /// Angular-unit drive for the Bloch integrator.
    pub fn bloch(&self, params: &EmitterParams) -> BlochDrive<f64> {
        let to_rad_ns = 2.0 * std::f64::consts::PI * 1e-3;
        BlochDrive {
            detuning: self.detuning_from_emitter * to_rad_ns,
            rabi: self.rabi_frequency * to_rad_ns,
            phase: self.phase,
            decay: params.gamma_rad_per_ns(),
        }
    }
}

/// Convert an ordinary frequency in MHz to rad/ns.
pub fn mhz_to_rad_per_ns(f: f64) -> f64 {
    2.0 * std::f64::consts::PI * f * 1e-3
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rabi_frequency_fixed_by_power() {
        let p = EmitterParams::default();
        let d = DriveField::new(&p, 0.0, 17.5, 0.0, 30.0).unwrap();
        assert_eq!(d.rabi_frequency, p.natural_linewidth * (17.5 / p.saturation_power / 2.0).sqrt());
        assert!(DriveField::new(&p, 0.0, -1.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn bloch_conversion() {
        let p = EmitterParams::default();
        let d = DriveField::new(&p, 10.0, 5.0, 0.2, 1.0).unwrap().bloch(&p);
        assert!((d.detuning - mhz_to_rad_per_ns(10.0)).abs() < 1e-15);
        assert!((d.decay - p.gamma_rad_per_ns()).abs() < 1e-15);
    }
}
