use rand_distr::{Binomial, Distribution};

use crate::error::Result;
use crate::io::rng::SimRng;
use crate::physics::counting::{probe_rates, probe_with_ionization};
use crate::physics::params::EmitterParams;
use crate::physics::state::{Charge, EmitterState};

use super::CrcConfig;

/// Per-clock-cycle counts of one probe window.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClockedCounter {
    pub bin_counts: Vec<u64>,
}

impl ClockedCounter {
    pub fn total(&self) -> u64 {
        self.bin_counts.iter().sum()
    }

    pub fn len(&self) -> usize {
        self.bin_counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bin_counts.is_empty()
    }
}

/// Probe and split the window total over clock cycles.
///
/// The total is the draw [`probe_with_ionization`] makes on the same stream;
/// it is then spread multinomially with per-cycle weights equal to the
/// expected counts in that cycle, so cycles after a jump hold dark counts only.
pub fn probe_window_counts(
    state: &EmitterState,
    config: &CrcConfig,
    params: &EmitterParams,
    rng: &mut SimRng,
) -> Result<(ClockedCounter, EmitterState)> {
    let drive = config.probe_drive(state, params);
    let probe = probe_with_ionization(state, &drive, config.probe_duration, params, rng)?;
    let n = config.probe_cycles();
    let clock = config.clock_period;
    let bright_until = match (state.charge, probe.ion_time) {
        (Charge::Dark, _) => 0.0,
        (Charge::Bright, Some(t)) => t,
        (Charge::Bright, None) => config.probe_duration,
    };
    let (rate, _) = probe_rates(&drive, params);
    let bright = rate * params.detection_efficiency * 1e-6;
    let dark = params.dark_count_rate * 1e-6;
    let weights: Vec<f64> = (0..n)
        .map(|k| {
            let t0 = k as f64 * clock;
            let lit = (bright_until - t0).clamp(0.0, clock);
            bright * lit + dark * clock
        })
        .collect();
    let mut remaining = probe.counts;
    let mut weight_left: f64 = weights.iter().sum();
    let mut bins = vec![0u64; n];
    for (k, w) in weights.iter().enumerate() {
        if remaining == 0 {
            break;
        }
        if k + 1 == n || weight_left <= 0.0 {
            bins[k] = remaining;
            break;
        }
        let p = (w / weight_left).clamp(0.0, 1.0);
        let c = if p >= 1.0 {
            remaining
        } else {
            Binomial::new(remaining, p).expect("valid binomial").sample(rng)
        };
        bins[k] = c;
        remaining -= c;
        weight_left -= w;
    }
    Ok((ClockedCounter { bin_counts: bins }, probe.state))
}
