//! Repeated charge-resonance checks over a grid of thresholds and laser
//! setpoints.

use serde::{Deserialize, Serialize};

use crate::crc::{crc_run, CrcConfig, CrcOutcome};
use crate::error::{Error, Result};
use crate::io::units;
use crate::physics::params::EmitterParams;

use super::{run_chains, InitialState};

const DOMAIN: u32 = 7;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CrcSweepConfig {
    pub c_pass_values: Vec<u64>,
    /// Laser setpoints; each overrides the check's `probe_laser_offset`.
    #[serde(with = "units::vec::mhz")]
    pub offsets: Vec<f64>,
    pub runs_per_setting: usize,
    pub initial_state: InitialState,
}

impl Default for CrcSweepConfig {
    fn default() -> Self {
        Self {
            c_pass_values: vec![50, 70, 90, 110],
            offsets: vec![0.0],
            runs_per_setting: 10_000,
            initial_state: InitialState::Dark,
        }
    }
}

impl CrcSweepConfig {
    pub fn validate(&self, base: &CrcConfig) -> Result<()> {
        if self.c_pass_values.is_empty() {
            return Err(Error::config("experiment.c_pass_values", "must not be empty"));
        }
        if self.offsets.is_empty() {
            return Err(Error::config("experiment.offsets", "must not be empty"));
        }
        if self.runs_per_setting == 0 {
            return Err(Error::config("experiment.runs_per_setting", "must be >= 1"));
        }
        for (c, o) in self.settings(base) {
            c.validate().map_err(|e| match e {
                Error::Config { message, .. } => Error::config(
                    "experiment.c_pass_values",
                    format!("setting c_pass={} offset={o} MHz: {message}", c.c_pass),
                ),
                other => other,
            })?;
        }
        Ok(())
    }

    /// One check configuration per `(c_pass, offset)`, offsets varying
    /// fastest.
    pub fn settings(&self, base: &CrcConfig) -> Vec<(CrcConfig, f64)> {
        self.c_pass_values
            .iter()
            .flat_map(|c| {
                self.offsets.iter().map(move |o| {
                    (
                        CrcConfig {
                            c_pass: *c,
                            probe_laser_offset: *o,
                            ..base.clone()
                        },
                        *o,
                    )
                })
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepRow {
    pub c_pass: u64,
    pub offset: f64,
    pub run: usize,
    pub outcome: CrcOutcome,
}

pub fn run_crc_sweep(
    config: &CrcSweepConfig,
    base: &CrcConfig,
    params: &EmitterParams,
    seed: u64,
    n_workers: usize,
) -> Result<Vec<SweepRow>> {
    config.validate(base)?;
    params.validate()?;
    let settings = config.settings(base);
    let n = config.runs_per_setting;
    run_chains(seed, DOMAIN, settings.len() * n, 1, n_workers, |_, range, rng| {
        let mut out = Vec::with_capacity(range.len());
        for item in range {
            let (crc, offset) = &settings[item / n];
            let st = config.initial_state.prepare(params, rng)?;
            let (outcome, _) = crc_run(&st, crc, params, rng)?;
            out.push(SweepRow {
                c_pass: crc.c_pass,
                offset: *offset,
                run: item % n,
                outcome,
            });
        }
        Ok(out)
    })
}

/// Heralded centers (emitter frequency, MHz) of one setting.
pub fn heralded_centers(rows: &[SweepRow], c_pass: u64, offset: f64) -> Vec<f64> {
    rows.iter()
        .filter(|r| r.c_pass == c_pass && r.offset == offset && r.outcome.heralded)
        .map(|r| r.outcome.heralded_detuning + r.offset)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::stats::center_statistics;

    #[test]
    fn settings_grid_order() {
        let c = CrcSweepConfig { offsets: vec![-50.0, 50.0], ..Default::default() };
        let s = c.settings(&CrcConfig::default());
        assert_eq!(s.len(), 8);
        assert_eq!((s[1].0.c_pass, s[1].1), (50, 50.0));
        assert_eq!(s[1].0.probe_laser_offset, 50.0);
    }

    #[test]
    fn invalid_setting_names_the_sweep_field() {
        let c = CrcSweepConfig { c_pass_values: vec![5], ..Default::default() };
        let err = c.validate(&CrcConfig::default()).unwrap_err().to_string();
        assert!(err.contains("experiment.c_pass_values"), "{err}");
    }

    #[test]
    fn higher_threshold_narrows_centers() {
        let params = EmitterParams::default();
        let c = CrcSweepConfig { c_pass_values: vec![50, 110], runs_per_setting: 3000, ..Default::default() };
        let rows = run_crc_sweep(&c, &CrcConfig::default(), &params, 2, 2).unwrap();
        let (lo, _) = center_statistics(&heralded_centers(&rows, 50, 0.0)).unwrap();
        let (hi, _) = center_statistics(&heralded_centers(&rows, 110, 0.0)).unwrap();
        assert!(hi < lo, "{hi} vs {lo}");
    }
}
