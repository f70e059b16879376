//! Two-probe sequences: repump / probe / probe and probe / repump / probe.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::rng::SimRng;
use crate::io::units;
use crate::physics::counting::probe_with_ionization;
use crate::physics::params::EmitterParams;
use crate::physics::repump::repump_apply;
use crate::physics::state::{DriveField, EmitterState};

use super::{nonneg, positive, run_chains, InitialState};

const DOMAIN_DOUBLE: u32 = 2;
const DOMAIN_PUMP: u32 = 3;

/// Probe laser settings shared by both sequences.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProbeSettings {
    #[serde(with = "units::us")]
    pub duration: f64,
    #[serde(with = "units::nw")]
    pub power: f64,
    /// Laser setpoint relative to the nominal center.
    #[serde(with = "units::mhz")]
    pub laser_offset: f64,
}

impl Default for ProbeSettings {
    fn default() -> Self {
        Self {
            duration: 500.0,
            power: 100.0,
            laser_offset: 0.0,
        }
    }
}

impl ProbeSettings {
    fn validate(&self, prefix: &str) -> Result<()> {
        positive(&format!("{prefix}.duration"), self.duration)?;
        nonneg(&format!("{prefix}.power"), self.power)?;
        if !self.laser_offset.is_finite() {
            return Err(Error::config(&format!("{prefix}.laser_offset"), "must be finite"));
        }
        Ok(())
    }

    fn probe(&self, st: &EmitterState, params: &EmitterParams, rng: &mut SimRng) -> Result<(u64, EmitterState)> {
        let drive = DriveField::new(params, st.laser_detuning(self.laser_offset), self.power, 0.0, self.duration * 1e3)?;
        let r = probe_with_ionization(st, &drive, self.duration, params, rng)?;
        Ok((r.counts, r.state))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DoubleProbeConfig {
    pub probe: ProbeSettings,
    #[serde(with = "units::us")]
    pub repump_duration: f64,
    #[serde(with = "units::nw")]
    pub repump_power: f64,
    pub n_shots: usize,
    pub chain_length: usize,
}

impl Default for DoubleProbeConfig {
    fn default() -> Self {
        Self {
            probe: ProbeSettings::default(),
            repump_duration: 500.0,
            repump_power: 100_000.0,
            n_shots: 10_000,
            chain_length: 100,
        }
    }
}

impl DoubleProbeConfig {
    pub fn validate(&self) -> Result<()> {
        self.probe.validate("experiment.probe")?;
        nonneg("experiment.repump_duration", self.repump_duration)?;
        nonneg("experiment.repump_power", self.repump_power)?;
        shots("experiment", self.n_shots, self.chain_length)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PumpProbeConfig {
    pub probe: ProbeSettings,
    #[serde(with = "units::us")]
    pub repump_duration: f64,
    #[serde(with = "units::nw")]
    pub repump_power: f64,
    pub n_shots: usize,
    pub chain_length: usize,
    pub initial_state: InitialState,
}

impl Default for PumpProbeConfig {
    fn default() -> Self {
        Self {
            probe: ProbeSettings::default(),
            repump_duration: 500.0,
            repump_power: 100_000.0,
            n_shots: 10_000,
            chain_length: 100,
            initial_state: InitialState::Repumped,
        }
    }
}

impl PumpProbeConfig {
    pub fn validate(&self) -> Result<()> {
        self.probe.validate("experiment.probe")?;
        nonneg("experiment.repump_duration", self.repump_duration)?;
        nonneg("experiment.repump_power", self.repump_power)?;
        shots("experiment", self.n_shots, self.chain_length)
    }

    pub fn dose(&self) -> f64 {
        self.repump_power * self.repump_duration
    }
}

fn shots(prefix: &str, n: usize, chain: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::config(&format!("{prefix}.n_shots"), "must be >= 1"));
    }
    if chain == 0 {
        return Err(Error::config(&format!("{prefix}.chain_length"), "must be >= 1"));
    }
    Ok(())
}

/// Counts of the two probes of one shot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct PairRecord {
    pub shot: usize,
    pub first: u64,
    pub second: u64,
}

/// Repump, then two back-to-back probes, per shot.
pub fn run_double_probe(
    config: &DoubleProbeConfig,
    params: &EmitterParams,
    seed: u64,
    n_workers: usize,
) -> Result<Vec<PairRecord>> {
    config.validate()?;
    params.validate()?;
    let dose = config.repump_power * config.repump_duration;
    run_chains(seed, DOMAIN_DOUBLE, config.n_shots, config.chain_length, n_workers, |_, range, rng| {
        let mut st = EmitterState::dark();
        let mut out = Vec::with_capacity(range.len());
        for shot in range {
            st = repump_apply(&st, dose, params, rng)?;
            let (first, s) = config.probe.probe(&st, params, rng)?;
            let (second, s) = config.probe.probe(&s, params, rng)?;
            st = s;
            out.push(PairRecord { shot, first, second });
        }
        Ok(out)
    })
}

/// Probe, repump of the configured dose, probe, repeated on one emitter.
pub fn run_probe_repump_probe(
    config: &PumpProbeConfig,
    params: &EmitterParams,
    seed: u64,
    n_workers: usize,
) -> Result<Vec<PairRecord>> {
    config.validate()?;
    params.validate()?;
    let dose = config.dose();
    run_chains(seed, DOMAIN_PUMP, config.n_shots, config.chain_length, n_workers, |_, range, rng| {
        let mut st = config.initial_state.prepare(params, rng)?;
        let mut out = Vec::with_capacity(range.len());
        for shot in range {
            let (first, s) = config.probe.probe(&st, params, rng)?;
            let s = repump_apply(&s, dose, params, rng)?;
            let (second, s) = config.probe.probe(&s, params, rng)?;
            st = s;
            out.push(PairRecord { shot, first, second });
        }
        Ok(out)
    })
}

/// `P(second >= threshold | first < threshold)`; `None` without such shots.
pub fn recovery_probability(pairs: &[PairRecord], threshold: u64) -> Option<f64> {
    let low: Vec<_> = pairs.iter().filter(|p| p.first < threshold).collect();
    if low.is_empty() {
        return None;
    }
    Some(low.iter().filter(|p| p.second >= threshold).count() as f64 / low.len() as f64)
}
