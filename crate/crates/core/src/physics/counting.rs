use rand::Rng;
use rand_distr::{Distribution, Exp, Poisson};

use crate::error::{Error, Result};
use crate::io::rng::SimRng;
use crate::physics::optics::scattering_rate;
use crate::physics::params::EmitterParams;
use crate::physics::state::{Charge, DriveField, EmitterState};

/// One Poisson draw with the given mean.
pub fn poisson<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    Poisson::new(mean).map(|d| d.sample(rng) as u64).unwrap_or(0)
}

/// Mean detected counts for an emitted `rate` (1/s) over `duration` µs.
pub fn mean_counts(rate: f64, duration: f64, params: &EmitterParams) -> f64 {
    (rate * params.detection_efficiency + params.dark_count_rate) * duration * 1e-6
}

/// Detected counts in a window of `duration` µs at emitted `rate` (1/s).
pub fn sample_counts(rate: f64, duration: f64, params: &EmitterParams, rng: &mut SimRng) -> Result<u64> {
    if !(rate >= 0.0) || !(duration >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "rate and duration must be >= 0 (rate {rate}, duration {duration})"
        )));
    }
    Ok(poisson(mean_counts(rate, duration, params), rng))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeResult {
    pub counts: u64,
    pub state: EmitterState,
    /// Time of the ionization jump within the window, µs.
    pub ion_time: Option<f64>,
}

/// Emission and ionization rates (1/s) for a drive on a bright emitter.
pub fn probe_rates(drive: &DriveField, params: &EmitterParams) -> (f64, f64) {
    let s = drive.saturation(params);
    let rate = scattering_rate(drive.detuning_from_emitter, s, params).unwrap_or(0.0);
    (rate, params.ionization_rate(rate, s))
}

/// Resonant probe of `duration` µs with ionization as a jump process.
///
/// Draw order: jump time (only for a bright emitter with nonzero ionization
/// rate), then a single Poisson draw for the window total.
pub fn probe_with_ionization(
    state: &EmitterState,
    drive: &DriveField,
    duration: f64,
    params: &EmitterParams,
    rng: &mut SimRng,
) -> Result<ProbeResult> {
    if !(duration > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "probe duration must be > 0, got {duration}"
        )));
    }
    let dark = params.dark_count_rate * duration * 1e-6;
    if state.charge == Charge::Dark {
        return Ok(ProbeResult {
            counts: poisson(dark, rng),
            state: *state,
            ion_time: None,
        });
    }
    let (rate, lambda) = probe_rates(drive, params);
    let mut out = *state;
    let mut ion_time = None;
    if lambda > 0.0 {
        let t = Exp::new(lambda * 1e-6).expect("positive rate").sample(rng);
        if t < duration {
            ion_time = Some(t);
            out.charge = Charge::Dark;
        }
    }
    let bright_time = ion_time.unwrap_or(duration);
    let mean = rate * params.detection_efficiency * bright_time * 1e-6 + dark;
    Ok(ProbeResult {
        counts: poisson(mean, rng),
        state: out,
        ion_time,
    })
}

/// Probability that a bright emitter survives a probe of `duration` µs.
pub fn survival_probability(drive: &DriveField, duration: f64, params: &EmitterParams) -> f64 {
    let (_, lambda) = probe_rates(drive, params);
    (-lambda * duration * 1e-6).exp()
}
