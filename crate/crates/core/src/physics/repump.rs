use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::io::rng::SimRng;
use crate::physics::bloch::DensityMatrix;
use crate::physics::params::EmitterParams;
use crate::physics::state::{Charge, EmitterState};

/// New transition center after a charge cycle, MHz.
pub fn spectral_jump_sample(params: &EmitterParams, rng: &mut SimRng) -> f64 {
    if params.inhomogeneous_sigma == 0.0 {
        return 0.0;
    }
    Normal::new(0.0, params.inhomogeneous_sigma)
        .expect("validated sigma")
        .sample(rng)
}

/// Off-resonant repump of `dose` nW·µs.
///
/// With probability `1 - exp(-dose/d0)` the pulse cycles the charge: the
/// emitter ends Bright with probability `repump_max_prob` (Dark otherwise),
/// with a freshly drawn center and the optical state reset to ground. The
/// outcome of an activated cycle does not depend on the prior state.
pub fn repump_apply(
    state: &EmitterState,
    dose: f64,
    params: &EmitterParams,
    rng: &mut SimRng,
) -> Result<EmitterState> {
    if !(dose >= 0.0) {
        return Err(Error::InvalidArgument(format!("repump dose must be >= 0, got {dose}")));
    }
    if dose == 0.0 {
        return Ok(*state);
    }
    let act = params.repump_activation(dose);
    if rng.random::<f64>() >= act {
        return Ok(*state);
    }
    let charge = if rng.random::<f64>() < params.repump_max_prob {
        Charge::Bright
    } else {
        Charge::Dark
    };
    Ok(EmitterState {
        charge,
        center_detuning: spectral_jump_sample(params, rng),
        rho: DensityMatrix::ground_state(),
    })
}

/// Probability that a repump of `dose` leaves a previously dark emitter
/// bright.
pub fn bright_after_repump(dose: f64, params: &EmitterParams) -> f64 {
    params.repump_activation(dose) * params.repump_max_prob
}
