//! Heralded Rabi oscillations: probe (or charge-resonance check), then a
//! train of identical resonant pulses with time-binned detection.

use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::analysis::fits::fit_damped_sine;
use crate::analysis::lsq::FitResult;
use crate::crc::{crc_run, CrcConfig};
use crate::error::{Error, Result};
use crate::io::rng::SimRng;
use crate::io::units;
use crate::physics::bloch::{propagate_binned, DensityMatrix};
use crate::physics::counting::poisson;
use crate::physics::params::EmitterParams;
use crate::physics::repump::repump_apply;
use crate::physics::state::{DriveField, EmitterState};

use super::probes::ProbeSettings;
use super::{nonneg, positive, run_chains};

const DOMAIN: u32 = 4;

/// How the emitter is prepared before the pulse train.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Heralding {
    /// Repump and probe once; every sequence is kept and the probe counts
    /// are recorded for grouping afterwards.
    #[default]
    PostSelect,
    /// Run the charge-resonance check; the pulse train follows a pass.
    Crc,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RabiConfig {
    pub heralding: Heralding,
    /// Probe used for post-selection.
    pub probe: ProbeSettings,
    #[serde(with = "units::us")]
    pub repump_duration: f64,
    #[serde(with = "units::nw")]
    pub repump_power: f64,
    #[serde(with = "units::nw")]
    pub drive_power: f64,
    /// Drive laser setpoint relative to the nominal center.
    #[serde(with = "units::mhz")]
    pub drive_offset: f64,
    #[serde(with = "units::ns")]
    pub pulse_duration: f64,
    #[serde(with = "units::ns")]
    pub bin_width: f64,
    /// Pulses per sequence; the emitter relaxes to ground between pulses.
    pub repetitions: u64,
    pub n_sequences: usize,
    /// Probe-count intervals used to group traces.
    pub intervals: Vec<CountInterval>,
}

/// Probe-count interval `[lo, hi)`; `hi` absent means unbounded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CountInterval {
    pub lo: u64,
    #[serde(default)]
    pub hi: Option<u64>,
}

impl CountInterval {
    pub const fn new(lo: u64, hi: Option<u64>) -> Self {
        Self { lo, hi }
    }

    pub fn contains(&self, c: u64) -> bool {
        c >= self.lo && self.hi.is_none_or(|h| c < h)
    }
}

impl Default for RabiConfig {
    fn default() -> Self {
        Self {
            heralding: Heralding::PostSelect,
            probe: ProbeSettings::default(),
            repump_duration: 500.0,
            repump_power: 100_000.0,
            drive_power: 17.5,
            drive_offset: 0.0,
            pulse_duration: 30.0,
            bin_width: 1.0,
            repetitions: 500,
            n_sequences: 10_000,
            intervals: vec![
                CountInterval::new(10, Some(50)),
                CountInterval::new(50, Some(80)),
                CountInterval::new(80, Some(100)),
                CountInterval::new(100, None),
            ],
        }
    }
}

impl RabiConfig {
    pub fn validate(&self) -> Result<()> {
        nonneg("experiment.repump_duration", self.repump_duration)?;
        nonneg("experiment.repump_power", self.repump_power)?;
        nonneg("experiment.drive_power", self.drive_power)?;
        positive("experiment.pulse_duration", self.pulse_duration)?;
        positive("experiment.bin_width", self.bin_width)?;
        positive("experiment.probe.duration", self.probe.duration)?;
        if self.n_bins() == 0 {
            return Err(Error::config("experiment.bin_width", "longer than the pulse"));
        }
        if self.repetitions == 0 {
            return Err(Error::config("experiment.repetitions", "must be >= 1"));
        }
        if self.n_sequences == 0 {
            return Err(Error::config("experiment.n_sequences", "must be >= 1"));
        }
        for CountInterval { lo, hi } in &self.intervals {
            if hi.is_some_and(|h| h <= *lo) {
                return Err(Error::config("experiment.intervals", format!("empty interval [{lo}, {hi:?})")));
            }
        }
        Ok(())
    }

    pub fn n_bins(&self) -> usize {
        (self.pulse_duration / self.bin_width + 1e-9).floor() as usize
    }

    /// Bin centers, ns.
    pub fn times(&self) -> Vec<f64> {
        (0..self.n_bins()).map(|k| (k as f64 + 0.5) * self.bin_width).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RabiRecord {
    pub sequence: usize,
    /// Counts of the heralding probe (the final probe under the check).
    pub probe_counts: u64,
    pub heralded: bool,
    pub attempts: u64,
    /// Detected photons per time bin, summed over the repetitions.
    pub bins: Vec<u64>,
}

/// Expected detections per bin for one pulse: `η Γ ∫ρ_ee dt`.
pub fn detection_probabilities(
    state: &EmitterState,
    config: &RabiConfig,
    params: &EmitterParams,
) -> Result<Vec<f64>> {
    let n = config.n_bins();
    if !state.is_bright() {
        return Ok(vec![0.0; n]);
    }
    let drive = DriveField::new(
        params,
        state.laser_detuning(config.drive_offset),
        config.drive_power,
        0.0,
        config.pulse_duration,
    )?
    .bloch(params);
    let duration = config.bin_width * n as f64;
    let (_, integrals) = propagate_binned(&DensityMatrix::ground_state(), &drive, duration, n)?;
    let k = params.detection_efficiency * params.gamma_rad_per_ns();
    Ok(integrals.into_iter().map(|v| (k * v).clamp(0.0, 1.0)).collect())
}

fn pulse_train(
    state: &EmitterState,
    config: &RabiConfig,
    params: &EmitterParams,
    rng: &mut SimRng,
) -> Result<Vec<u64>> {
    let probs = detection_probabilities(state, config, params)?;
    let dark = params.dark_count_rate * config.bin_width * 1e-9 * config.repetitions as f64;
    probs
        .iter()
        .map(|p| {
            let b = Binomial::new(config.repetitions, *p)
                .map_err(|e| Error::InvalidArgument(format!("detection probability: {e}")))?;
            Ok(b.sample(rng) + poisson(dark, rng))
        })
        .collect()
}

pub fn run_rabi(
    config: &RabiConfig,
    crc: &CrcConfig,
    params: &EmitterParams,
    seed: u64,
    n_workers: usize,
) -> Result<Vec<RabiRecord>> {
    config.validate()?;
    params.validate()?;
    if config.heralding == Heralding::Crc {
        crc.validate()?;
    }
    let dose = config.repump_power * config.repump_duration;
    run_chains(seed, DOMAIN, config.n_sequences, 1, n_workers, |_, range, rng| {
        let mut out = Vec::with_capacity(range.len());
        for sequence in range {
            let (st, probe_counts, heralded, attempts) = match config.heralding {
                Heralding::PostSelect => {
                    let st = repump_apply(&EmitterState::dark(), dose, params, rng)?;
                    let drive = DriveField::new(
                        params,
                        st.laser_detuning(config.probe.laser_offset),
                        config.probe.power,
                        0.0,
                        config.probe.duration * 1e3,
                    )?;
                    let p = crate::physics::counting::probe_with_ionization(&st, &drive, config.probe.duration, params, rng)?;
                    (p.state, p.counts, true, 1)
                }
                Heralding::Crc => {
                    let (o, st) = crc_run(&EmitterState::dark(), crc, params, rng)?;
                    (st, o.final_counts, o.heralded, o.attempts)
                }
            };
            let bins = pulse_train(&st, config, params, rng)?;
            out.push(RabiRecord {
                sequence,
                probe_counts,
                heralded,
                attempts,
                bins,
            });
        }
        Ok(out)
    })
}

/// Mean trace of the sequences whose probe counts fall in one interval.
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalTrace {
    pub interval: CountInterval,
    pub n_sequences: usize,
    /// Detections per bin per sequence.
    pub mean: Vec<f64>,
    /// Poisson inverse variances of `mean`.
    pub weights: Vec<f64>,
}

pub fn interval_traces(records: &[RabiRecord], intervals: &[CountInterval]) -> Vec<IntervalTrace> {
    intervals
        .iter()
        .map(|iv| {
            let sel: Vec<_> = records
                .iter()
                .filter(|r| r.heralded && iv.contains(r.probe_counts))
                .collect();
            let n_bins = records.first().map_or(0, |r| r.bins.len());
            let mut sum = vec![0u64; n_bins];
            for r in &sel {
                for (s, b) in sum.iter_mut().zip(&r.bins) {
                    *s += b;
                }
            }
            let n = sel.len().max(1) as f64;
            IntervalTrace {
                interval: *iv,
                n_sequences: sel.len(),
                mean: sum.iter().map(|s| *s as f64 / n).collect(),
                weights: sum.iter().map(|s| n * n / (*s as f64).max(1.0)).collect(),
            }
        })
        .collect()
}

/// Damped-sine fit of one interval trace.
pub fn fit_trace(times: &[f64], trace: &IntervalTrace) -> Result<FitResult<f64>> {
    fit_damped_sine(times, &trace.mean, Some(&trace.weights))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::stats::ks_two_sample;

    #[test]
    fn mean_trace_matches_bloch_expectation() {
        let params = EmitterParams::default();
        let config = RabiConfig { repetitions: 100_000, ..RabiConfig::default() };
        let st = EmitterState::bright(0.0);
        let probs = detection_probabilities(&st, &config, &params).unwrap();
        let mut rng = crate::io::rng::derive_stream(3, 0);
        let trace = pulse_train(&st, &config, &params, &mut rng).unwrap();
        let mut chi2 = 0.0;
        for (c, p) in trace.iter().zip(&probs) {
            let m = p * config.repetitions as f64;
            chi2 += (*c as f64 - m).powi(2) / m.max(1.0);
        }
        assert!(chi2 / (probs.len() as f64) < 1.5, "{chi2}");
        // one Rabi period at resonance is 1/41 MHz ≈ 24 ns
        let imax = (0..probs.len()).max_by(|a, b| probs[*a].total_cmp(&probs[*b])).unwrap();
        assert!((10..14).contains(&imax), "{imax}");
    }

    #[test]
    fn dark_emitter_gives_empty_trace() {
        let params = EmitterParams::default();
        let probs = detection_probabilities(&EmitterState::dark(), &RabiConfig::default(), &params).unwrap();
        assert!(probs.iter().all(|p| *p == 0.0));
    }

    #[test]
    fn generalized_frequency_grows_with_detuning() {
        let params = EmitterParams { ionization_yield: 0.0, ..EmitterParams::default() };
        let config = RabiConfig { pulse_duration: 60.0, ..RabiConfig::default() };
        let times = config.times();
        let mut last = 0.0;
        for d in [0.0, 30.0, 60.0] {
            let probs = detection_probabilities(&EmitterState::bright(d), &config, &params).unwrap();
            let fit = fit_damped_sine(&times, &probs, None).unwrap();
            let w = fit.get("omega").unwrap();
            assert!(w > last);
            last = w;
        }
    }

    /// Post-selecting single probes at `C >= θ` and heralding with the
    /// check at `c_pass = c_repump = θ` sample the same conditional
    /// ensemble, because every failed attempt is followed by a full repump.
    #[test]
    fn post_selection_equals_real_time_heralding() {
        let params = EmitterParams::default();
        let theta = 80;
        let base = RabiConfig { n_sequences: 3000, repetitions: 200, ..RabiConfig::default() };
        let post = run_rabi(&base, &CrcConfig::default(), &params, 31, 1).unwrap();
        let live_cfg = RabiConfig { heralding: Heralding::Crc, n_sequences: 1000, ..base.clone() };
        let crc = CrcConfig { max_attempts: 0, ..CrcConfig::with_thresholds(theta, theta) };
        let live = run_rabi(&live_cfg, &crc, &params, 32, 1).unwrap();
        let totals = |v: &[&RabiRecord]| v.iter().map(|r| r.bins.iter().sum::<u64>() as f64).collect::<Vec<_>>();
        let a: Vec<_> = post.iter().filter(|r| r.probe_counts >= theta).collect();
        let b: Vec<_> = live.iter().collect();
        assert!(b.iter().all(|r| r.heralded && r.probe_counts >= theta));
        let ks = ks_two_sample(&totals(&a), &totals(&b)).unwrap();
        assert!(ks.p_value > 0.01, "{ks:?}");
        let probes = |v: &[&RabiRecord]| v.iter().map(|r| r.probe_counts as f64).collect::<Vec<_>>();
        let ks = ks_two_sample(&probes(&a), &probes(&b)).unwrap();
        assert!(ks.p_value > 0.01, "{ks:?}");
    }

    #[test]
    fn grouping_respects_intervals() {
        let records: Vec<_> = [5u64, 15, 60, 60, 120]
            .iter()
            .enumerate()
            .map(|(i, c)| RabiRecord { sequence: i, probe_counts: *c, heralded: true, attempts: 1, bins: vec![*c; 3] })
            .collect();
        let t = interval_traces(&records, &RabiConfig::default().intervals);
        assert_eq!(t.iter().map(|t| t.n_sequences).collect::<Vec<_>>(), vec![1, 2, 0, 1]);
        assert_eq!(t[1].mean, vec![60.0; 3]);
    }
}
