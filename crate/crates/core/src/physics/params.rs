use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::units;

/// Static model parameters of one emitter.
///
/// Frequencies are ordinary (not angular) and quoted in MHz; powers in nW,
/// durations in µs. The optical detuning origin (nominal center) is 0 MHz.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EmitterParams {
    /// Natural (radiative) linewidth, FWHM.
    #[serde(with = "units::mhz")]
    pub natural_linewidth: f64,
    /// Standard deviation of the transition center drawn after a repump.
    #[serde(with = "units::mhz")]
    pub inhomogeneous_sigma: f64,
    /// Ionization probability per scattered photon at unit saturation.
    pub ionization_yield: f64,
    /// Ionization rate scales as `R * s^exponent`; 0 is a pure
    /// per-photon process, 1 an excited-state absorption of a drive photon.
    pub ionization_intensity_exponent: f64,
    /// Detected photons per emitted photon.
    pub detection_efficiency: f64,
    #[serde(with = "units::per_s")]
    pub dark_count_rate: f64,
    /// Drive power at which the saturation parameter is 1.
    #[serde(with = "units::nw")]
    pub saturation_power: f64,
    /// Repump dose (power x duration) governing activation.
    #[serde(with = "units::nw_us")]
    pub repump_dose_scale: f64,
    /// Probability that an activated repump leaves the emitter bright.
    pub repump_max_prob: f64,
}

impl Default for EmitterParams {
    fn default() -> Self {
        Self {
            natural_linewidth: 31.0,
            inhomogeneous_sigma: 47.0,
            ionization_yield: 1.0e-9,
            ionization_intensity_exponent: 2.0,
            detection_efficiency: 2.52e-3,
            dark_count_rate: 100.0,
            saturation_power: 5.0,
            repump_dose_scale: 5.0e6,
            repump_max_prob: 0.75,
        }
    }
}

impl EmitterParams {
    /// Emitter embedded in a waveguide: same optics, broader spectral
    /// diffusion after repump.
    pub fn waveguide() -> Self {
        Self {
            inhomogeneous_sigma: 90.0,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let nonneg = [
            ("inhomogeneous_sigma", self.inhomogeneous_sigma),
            ("ionization_yield", self.ionization_yield),
            ("ionization_intensity_exponent", self.ionization_intensity_exponent),
            ("dark_count_rate", self.dark_count_rate),
            ("repump_dose_scale", self.repump_dose_scale),
            ("repump_max_prob", self.repump_max_prob),
        ];
        for (name, v) in nonneg {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::config(
                    format!("emitter.{name}"),
                    format!("must be finite and >= 0, got {v}"),
                ));
            }
        }
        if !(self.natural_linewidth.is_finite() && self.natural_linewidth > 0.0) {
            return Err(Error::config(
                "emitter.natural_linewidth",
                format!("must be > 0, got {}", self.natural_linewidth),
            ));
        }
        if !(self.saturation_power.is_finite() && self.saturation_power > 0.0) {
            return Err(Error::config(
                "emitter.saturation_power",
                format!("must be > 0, got {}", self.saturation_power),
            ));
        }
        if !(self.detection_efficiency > 0.0 && self.detection_efficiency <= 1.0) {
            return Err(Error::config(
                "emitter.detection_efficiency",
                format!("must lie in (0, 1], got {}", self.detection_efficiency),
            ));
        }
        if self.repump_max_prob > 1.0 {
            return Err(Error::config(
                "emitter.repump_max_prob",
                format!("must be <= 1, got {}", self.repump_max_prob),
            ));
        }
        Ok(())
    }

    /// Radiative decay rate in rad/ns.
    pub fn gamma_rad_per_ns(&self) -> f64 {
        2.0 * std::f64::consts::PI * self.natural_linewidth * 1e-3
    }

    /// Radiative decay rate in 1/s.
    pub fn gamma_per_s(&self) -> f64 {
        2.0 * std::f64::consts::PI * self.natural_linewidth * 1e6
    }

    /// Saturation parameter for a drive power in nW.
    pub fn saturation(&self, power: f64) -> f64 {
        power / self.saturation_power
    }

    /// Rabi frequency (MHz, ordinary) for a drive power in nW.
    pub fn rabi_frequency(&self, power: f64) -> f64 {
        self.natural_linewidth * (self.saturation(power) / 2.0).sqrt()
    }

    /// Ionization jump rate (1/s) while scattering `rate` photons/s at
    /// saturation `s`.
    pub fn ionization_rate(&self, rate: f64, s: f64) -> f64 {
        if self.ionization_yield == 0.0 || rate == 0.0 {
            return 0.0;
        }
        self.ionization_yield * rate * s.powf(self.ionization_intensity_exponent)
    }

    /// Probability that a repump of the given dose (nW·µs) acts.
    pub fn repump_activation(&self, dose: f64) -> f64 {
        if dose <= 0.0 {
            return 0.0;
        }
        if self.repump_dose_scale == 0.0 {
            return 1.0;
        }
        1.0 - (-dose / self.repump_dose_scale).exp()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        EmitterParams::default().validate().unwrap();
        EmitterParams::waveguide().validate().unwrap();
    }

    #[test]
    fn invalid_fields_are_named() {
        let p = EmitterParams {
            detection_efficiency: 0.0,
            ..Default::default()
        };
        let msg = p.validate().unwrap_err().to_string();
        assert!(msg.contains("detection_efficiency"), "{msg}");

        let p = EmitterParams {
            repump_max_prob: 1.5,
            ..Default::default()
        };
        assert!(p.validate().unwrap_err().to_string().contains("repump_max_prob"));

        let p = EmitterParams {
            natural_linewidth: 0.0,
            ..Default::default()
        };
        assert!(p.validate().is_err());
    }

    #[test]
    fn rabi_frequency_follows_saturation() {
        let p = EmitterParams::default();
        let s = p.saturation(17.5);
        assert!((p.rabi_frequency(17.5) - 31.0 * (s / 2.0).sqrt()).abs() < 1e-12);
        assert_eq!(p.rabi_frequency(0.0), 0.0);
    }

    #[test]
    fn repump_activation_limits() {
        let p = EmitterParams::default();
        assert_eq!(p.repump_activation(0.0), 0.0);
        assert!(p.repump_activation(1e12) > 0.999_999);
    }
}
