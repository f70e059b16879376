//! Charge-resonance check: threshold the counts of a resonant probe, re-probe
//! or repump, and repeat until the emitter is heralded bright and resonant.

mod counter;

pub use counter::{probe_window_counts, ClockedCounter};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::rng::SimRng;
use crate::io::units;
use crate::physics::counting::probe_with_ionization;
use crate::physics::params::EmitterParams;
use crate::physics::repump::repump_apply;
use crate::physics::state::{DriveField, EmitterState};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CrcConfig {
    pub c_pass: u64,
    pub c_repump: u64,
    #[serde(with = "units::us")]
    pub probe_duration: f64,
    #[serde(with = "units::nw")]
    pub probe_power: f64,
    #[serde(with = "units::us")]
    pub repump_duration: f64,
    #[serde(with = "units::nw")]
    pub repump_power: f64,
    #[serde(with = "units::us")]
    pub clock_period: f64,
    /// 0 means unbounded.
    pub max_attempts: u64,
    /// Probe laser setpoint relative to the nominal center.
    #[serde(with = "units::mhz")]
    pub probe_laser_offset: f64,
}

impl Default for CrcConfig {
    fn default() -> Self {
        Self {
            c_pass: 110,
            c_repump: 10,
            probe_duration: 500.0,
            probe_power: 100.0,
            repump_duration: 500.0,
            repump_power: 100_000.0,
            clock_period: 10.0,
            max_attempts: 10_000,
            probe_laser_offset: 0.0,
        }
    }
}

impl CrcConfig {
    pub fn with_thresholds(c_pass: u64, c_repump: u64) -> Self {
        Self {
            c_pass,
            c_repump,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.c_repump > self.c_pass {
            return Err(Error::config(
                "crc.c_repump",
                format!(
                    "c_repump <= c_pass violated ({} > {})",
                    self.c_repump, self.c_pass
                ),
            ));
        }
        if !(self.clock_period > 0.0 && self.clock_period.is_finite()) {
            return Err(Error::config("crc.clock_period", "must be > 0"));
        }
        if !(self.probe_duration > 0.0 && self.probe_duration.is_finite()) {
            return Err(Error::config("crc.probe_duration", "must be > 0"));
        }
        let cycles = self.probe_duration / self.clock_period;
        if (cycles - cycles.round()).abs() > 1e-9 * cycles.max(1.0) {
            return Err(Error::config(
                "crc.probe_duration",
                format!(
                    "must be an integer multiple of clock_period ({} us / {} us)",
                    self.probe_duration, self.clock_period
                ),
            ));
        }
        for (name, v) in [
            ("crc.probe_power", self.probe_power),
            ("crc.repump_power", self.repump_power),
            ("crc.repump_duration", self.repump_duration),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::config(name, format!("must be >= 0, got {v}")));
            }
        }
        if !self.probe_laser_offset.is_finite() {
            return Err(Error::config("crc.probe_laser_offset", "must be finite"));
        }
        Ok(())
    }

    /// Clock cycles per probe window.
    pub fn probe_cycles(&self) -> usize {
        (self.probe_duration / self.clock_period).round() as usize
    }

    /// Repump dose, nW·µs.
    pub fn repump_dose(&self) -> f64 {
        self.repump_power * self.repump_duration
    }

    /// Duration rounded up to whole clock cycles.
    pub fn quantize(&self, duration: f64) -> f64 {
        if duration <= 0.0 {
            return 0.0;
        }
        let n = (duration / self.clock_period - 1e-9).ceil().max(1.0);
        n * self.clock_period
    }

    /// Probe drive on an emitter in `state`.
    pub fn probe_drive(&self, state: &EmitterState, params: &EmitterParams) -> DriveField {
        DriveField {
            detuning_from_emitter: state.laser_detuning(self.probe_laser_offset),
            power: self.probe_power,
            rabi_frequency: params.rabi_frequency(self.probe_power),
            phase: 0.0,
            duration: self.probe_duration * 1e3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Decision {
    Pass,
    Retry,
    Repump,
}

/// Counts at `c_pass` pass; counts at `c_repump` retry.
pub fn classify_counts(counts: u64, config: &CrcConfig) -> Decision {
    if counts >= config.c_pass {
        Decision::Pass
    } else if counts >= config.c_repump {
        Decision::Retry
    } else {
        Decision::Repump
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CrcOutcome {
    pub heralded: bool,
    pub attempts: u64,
    pub repumps: u64,
    pub final_counts: u64,
    /// Emitter center minus probe laser at termination, MHz.
    pub heralded_detuning: f64,
    /// µs.
    pub elapsed: f64,
}

/// Run the probe / classify / repump loop until a pass or `max_attempts`
/// probes.
pub fn crc_run(
    state: &EmitterState,
    config: &CrcConfig,
    params: &EmitterParams,
    rng: &mut SimRng,
) -> Result<(CrcOutcome, EmitterState)> {
    let probe_time = config.quantize(config.probe_duration);
    let repump_time = config.quantize(config.repump_duration);
    let dose = config.repump_dose();
    let mut st = *state;
    let mut out = CrcOutcome {
        heralded: false,
        attempts: 0,
        repumps: 0,
        final_counts: 0,
        heralded_detuning: 0.0,
        elapsed: 0.0,
    };
    loop {
        let drive = config.probe_drive(&st, params);
        let probe = probe_with_ionization(&st, &drive, config.probe_duration, params, rng)?;
        out.attempts += 1;
        out.elapsed += probe_time;
        out.final_counts = probe.counts;
        st = probe.state;
        let decision = classify_counts(probe.counts, config);
        if decision == Decision::Pass {
            out.heralded = true;
            break;
        }
        if config.max_attempts != 0 && out.attempts >= config.max_attempts {
            break;
        }
        if decision == Decision::Repump {
            st = repump_apply(&st, dose, params, rng)?;
            out.repumps += 1;
            out.elapsed += repump_time;
        }
    }
    out.heralded_detuning = st.center_detuning - config.probe_laser_offset;
    Ok((out, st))
}
