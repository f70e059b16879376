use crate::error::{Error, Result};
use crate::physics::params::EmitterParams;
use crate::scalar::Real;

/// Steady-state emitted photon rate (1/s) at detuning `delta` (MHz) and
/// saturation `s`.
pub fn scattering_rate(delta: f64, s: f64, params: &EmitterParams) -> Result<f64> {
    if !(s >= 0.0) {
        return Err(Error::InvalidArgument(format!("saturation must be >= 0, got {s}")));
    }
    Ok(lorentzian_rate(delta, s, params.natural_linewidth, params.gamma_per_s()))
}

/// `(Γ/2)·s/(1 + s + (2δ/γ)²)` for any scalar type; `gamma_fwhm` and `delta`
/// share units, `gamma_rate` sets the output unit.
pub fn lorentzian_rate<T: Real>(delta: T, s: T, gamma_fwhm: T, gamma_rate: T) -> T {
    if s == T::zero() {
        return T::zero();
    }
    let x = T::lit(2.0) * delta / gamma_fwhm;
    gamma_rate * T::lit(0.5) * s / (T::one() + s + x * x)
}

/// Power-broadened FWHM (MHz) of the scattering line.
pub fn power_broadened_fwhm(s: f64, params: &EmitterParams) -> f64 {
    params.natural_linewidth * (1.0 + s).sqrt()
}

/// Steady-state excited population.
pub fn steady_state_excited(delta: f64, s: f64, params: &EmitterParams) -> f64 {
    let x = 2.0 * delta / params.natural_linewidth;
    0.5 * s / (1.0 + s + x * x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn no_drive_no_light() {
        let p = EmitterParams::default();
        assert_eq!(scattering_rate(123.0, 0.0, &p).unwrap(), 0.0);
        assert!(scattering_rate(0.0, -0.1, &p).is_err());
    }

    #[test]
    fn saturated_rate_at_unit_s() {
        let p = EmitterParams::default();
        let r = scattering_rate(0.0, 1.0, &p).unwrap();
        let expect = 2.0 * std::f64::consts::PI * 31e6 / 4.0;
        assert!((r - expect).abs() / expect < 1e-12);
        assert!((r - 4.87e7).abs() < 0.01e7);
    }

    #[test]
    fn half_width_condition() {
        let p = EmitterParams::default();
        let s = 3.0;
        let delta = p.natural_linewidth / 2.0 * (1.0_f64 + s).sqrt();
        let r0 = scattering_rate(0.0, s, &p).unwrap();
        let r = scattering_rate(delta, s, &p).unwrap();
        assert!((r / r0 - 0.5).abs() < 1e-12);
        assert!((2.0 * delta - power_broadened_fwhm(s, &p)).abs() < 1e-12);
    }

    #[test]
    fn matches_bloch_steady_state() {
        use crate::physics::bloch::{propagate, BlochDrive, DensityMatrix};
        use crate::physics::state::mhz_to_rad_per_ns;
        let p = EmitterParams::default();
        for (delta, power) in [(0.0, 5.0), (20.0, 50.0), (-35.0, 1.0)] {
            let s = p.saturation(power);
            let drive = BlochDrive {
                detuning: mhz_to_rad_per_ns(delta),
                rabi: mhz_to_rad_per_ns(p.rabi_frequency(power)),
                phase: 0.0,
                decay: p.gamma_rad_per_ns(),
            };
            let rho = propagate(&DensityMatrix::ground_state(), &drive, 400.0).unwrap();
            assert!((rho.excited - steady_state_excited(delta, s, &p)).abs() < 1e-9);
        }
    }

    proptest! {
        #[test]
        fn even_and_monotone(d in 0.0f64..500.0, step in 0.001f64..50.0, s in 0.0f64..100.0) {
            let p = EmitterParams::default();
            let a = scattering_rate(d, s, &p).unwrap();
            prop_assert_eq!(a, scattering_rate(-d, s, &p).unwrap());
            prop_assert!(scattering_rate(d + step, s, &p).unwrap() <= a);
            prop_assert!(a >= 0.0 && a <= scattering_rate(0.0, s, &p).unwrap());
        }
    }
}
