//! Heralded Ramsey interferometry: charge-resonance check, two π/2 pulses
//! separated by a free delay, then an integrated readout window.

use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

use crate::analysis::fits::{fit_gaussian_envelope, fit_phase_fringe, EnvelopeOptions};
use crate::analysis::lsq::FitResult;
use crate::crc::{crc_run, CrcConfig};
use crate::error::{Error, Result};
use crate::io::units;
use crate::physics::bloch::{free_evolve, propagate, rotate, BlochDrive, DensityMatrix};
use crate::physics::params::EmitterParams;
use crate::physics::state::mhz_to_rad_per_ns;

use super::{nonneg, positive, run_chains, InitialState};

const DOMAIN: u32 = 5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PulseSpec {
    /// Instantaneous rotations.
    #[default]
    Ideal,
    /// Square pulses of the given power, each a quarter Rabi period long.
    Finite {
        #[serde(with = "units::nw")]
        power: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RamseyConfig {
    #[serde(with = "units::vec::ns")]
    pub delays: Vec<f64>,
    /// Phases of the second pulse, evenly spaced over one turn.
    pub n_phases: usize,
    pub pulse: PulseSpec,
    #[serde(with = "units::ns")]
    pub readout_window: f64,
    /// Radiative decay during the free delay.
    pub include_decay: bool,
    pub shots_per_point: usize,
    /// Per-shot starting state before the check.
    pub initial_state: InitialState,
    /// Delay at which the fringe has fully dephased; sets the mixed-state
    /// normalization.
    #[serde(with = "units::ns")]
    pub reference_delay: f64,
}

impl Default for RamseyConfig {
    fn default() -> Self {
        Self {
            delays: (0..=15).map(f64::from).collect(),
            n_phases: 8,
            pulse: PulseSpec::Ideal,
            readout_window: 5.0,
            include_decay: true,
            shots_per_point: 2000,
            initial_state: InitialState::Dark,
            reference_delay: 1000.0,
        }
    }
}

impl RamseyConfig {
    pub fn validate(&self) -> Result<()> {
        if self.delays.is_empty() {
            return Err(Error::config("experiment.delays", "must not be empty"));
        }
        for d in &self.delays {
            nonneg("experiment.delays", *d)?;
        }
        if self.n_phases < 4 {
            return Err(Error::config("experiment.n_phases", "needs at least 4 phases"));
        }
        if let PulseSpec::Finite { power } = self.pulse {
            positive("experiment.pulse.power", power)?;
        }
        positive("experiment.readout_window", self.readout_window)?;
        positive("experiment.reference_delay", self.reference_delay)?;
        if self.shots_per_point == 0 {
            return Err(Error::config("experiment.shots_per_point", "must be >= 1"));
        }
        Ok(())
    }

    pub fn phases(&self) -> Vec<f64> {
        (0..self.n_phases).map(|k| 2.0 * PI * k as f64 / self.n_phases as f64).collect()
    }
}

/// Averages over the shots of one `(delay, phase)` point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RamseyPoint {
    pub delay: f64,
    pub phase: f64,
    /// Marks the dephased normalization points.
    pub reference: bool,
    /// Mean detected emission in the readout window per shot.
    pub signal: f64,
    pub signal_stderr: f64,
    pub heralded: usize,
    pub mean_attempts: f64,
    pub mean_probe_counts: f64,
}

/// Excited population after the interferometer for an emitter detuned by
/// `detuning` (laser minus emitter, rad/ns).
pub fn final_excited(
    config: &RamseyConfig,
    params: &EmitterParams,
    detuning: f64,
    delay: f64,
    phase: f64,
) -> Result<f64> {
    let decay = params.gamma_rad_per_ns();
    let free_decay = if config.include_decay { decay } else { 0.0 };
    let pulse = |rho: &DensityMatrix<f64>, phi: f64| -> Result<DensityMatrix<f64>> {
        match config.pulse {
            PulseSpec::Ideal => Ok(rotate(rho, FRAC_PI_2, phi)),
            PulseSpec::Finite { power } => {
                let rabi = mhz_to_rad_per_ns(params.rabi_frequency(power));
                let drive = BlochDrive { detuning, rabi, phase: phi, decay };
                propagate(rho, &drive, FRAC_PI_2 / rabi)
            }
        }
    };
    let rho = pulse(&DensityMatrix::ground_state(), 0.0)?;
    let rho = free_evolve(&rho, detuning, free_decay, delay);
    Ok(pulse(&rho, phase)?.excited)
}

/// Detected photons in the readout window from an excited population.
pub fn readout_signal(excited: f64, config: &RamseyConfig, params: &EmitterParams) -> f64 {
    let decay = params.gamma_rad_per_ns();
    params.detection_efficiency * excited * (1.0 - (-decay * config.readout_window).exp())
}

pub fn run_ramsey(
    config: &RamseyConfig,
    crc: &CrcConfig,
    params: &EmitterParams,
    seed: u64,
    n_workers: usize,
) -> Result<Vec<RamseyPoint>> {
    config.validate()?;
    crc.validate()?;
    params.validate()?;
    let phases = config.phases();
    let mut grid: Vec<(f64, f64, bool)> = Vec::new();
    for d in &config.delays {
        for p in &phases {
            grid.push((*d, *p, false));
        }
    }
    for p in &phases {
        grid.push((config.reference_delay, *p, true));
    }
    let n = config.shots_per_point;
    let per_shot = run_chains(seed, DOMAIN, grid.len() * n, n, n_workers, |c, range, rng| {
        let (delay, phase, _) = grid[c];
        let mut out = Vec::with_capacity(range.len());
        for _ in range {
            let st = config.initial_state.prepare(params, rng)?;
            let (o, st) = crc_run(&st, crc, params, rng)?;
            if !o.heralded || !st.is_bright() {
                out.push(None);
                continue;
            }
            let detuning = mhz_to_rad_per_ns(st.laser_detuning(crc.probe_laser_offset));
            let e = final_excited(config, params, detuning, delay, phase)?;
            out.push(Some((readout_signal(e, config, params), o.attempts, o.final_counts)));
        }
        Ok(out)
    })?;
    Ok(grid
        .iter()
        .zip(per_shot.chunks(n))
        .map(|((delay, phase, reference), shots)| {
            let kept: Vec<_> = shots.iter().flatten().collect();
            let k = kept.len().max(1) as f64;
            let mean = kept.iter().map(|s| s.0).sum::<f64>() / k;
            let var = kept.iter().map(|s| (s.0 - mean).powi(2)).sum::<f64>() / (k - 1.0).max(1.0);
            RamseyPoint {
                delay: *delay,
                phase: *phase,
                reference: *reference,
                signal: mean,
                signal_stderr: (var / k).sqrt(),
                heralded: kept.len(),
                mean_attempts: kept.iter().map(|s| s.1 as f64).sum::<f64>() / k,
                mean_probe_counts: kept.iter().map(|s| s.2 as f64).sum::<f64>() / k,
            }
        })
        .collect())
}

/// Fringe amplitudes per delay and the coherence-time fit.
#[derive(Debug, Clone)]
pub struct RamseyAnalysis {
    /// Mean mixed-state signal at the reference delay.
    pub mixed_signal: f64,
    pub delays: Vec<f64>,
    /// Fringe amplitude of the signal normalized by twice the mixed signal.
    pub amplitudes: Vec<f64>,
    pub amplitude_errors: Vec<f64>,
    pub envelope: FitResult<f64>,
}

impl RamseyAnalysis {
    pub fn t2_star(&self) -> f64 {
        self.envelope.params[1]
    }

    pub fn t2_star_err(&self) -> f64 {
        self.envelope.stderr[1]
    }
}

pub fn analyze_ramsey(points: &[RamseyPoint]) -> Result<RamseyAnalysis> {
    let refs: Vec<_> = points.iter().filter(|p| p.reference).collect();
    if refs.is_empty() {
        return Err(Error::InvalidInput("no reference points for normalization".into()));
    }
    let mixed = refs.iter().map(|p| p.signal).sum::<f64>() / refs.len() as f64;
    if !(mixed > 0.0) {
        return Err(Error::InvalidInput("mixed-state reference signal is zero".into()));
    }
    let norm = 2.0 * mixed;
    let mut delays: Vec<f64> = points.iter().filter(|p| !p.reference).map(|p| p.delay).collect();
    delays.sort_by(f64::total_cmp);
    delays.dedup();
    let (mut amps, mut errs) = (Vec::new(), Vec::new());
    for d in &delays {
        let pts: Vec<_> = points.iter().filter(|p| !p.reference && p.delay == *d).collect();
        let phases: Vec<f64> = pts.iter().map(|p| p.phase).collect();
        let ys: Vec<f64> = pts.iter().map(|p| p.signal / norm).collect();
        let w: Vec<f64> = pts
            .iter()
            .map(|p| {
                let s = (p.signal_stderr / norm).max(1e-12);
                1.0 / (s * s)
            })
            .collect();
        let fit = fit_phase_fringe(&phases, &ys, Some(&w))?;
        amps.push(fit.params[0]);
        errs.push(fit.stderr[0]);
    }
    // Unweighted: the per-delay errors above carry only detuning sampling
    // noise, which vanishes at zero delay and would pin the whole envelope
    // to its first points. Readout noise is roughly uniform across delays.
    let envelope = fit_gaussian_envelope(&delays, &amps, None, &EnvelopeOptions::default())?;
    Ok(RamseyAnalysis {
        mixed_signal: mixed,
        delays,
        amplitudes: amps,
        amplitude_errors: errs,
        envelope,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::physics::state::EmitterState;
    use num_complex::Complex;

    fn no_ionization() -> EmitterParams {
        EmitterParams { ionization_yield: 0.0, ..EmitterParams::default() }
    }

    #[test]
    fn resonant_ideal_fringe_without_decay() {
        let params = EmitterParams::default();
        let config = RamseyConfig { include_decay: false, ..RamseyConfig::default() };
        for phase in config.phases() {
            let e = final_excited(&config, &params, 0.0, 7.0, phase).unwrap();
            // full contrast, unit visibility around 1/2
            assert!((e - 0.5 * (1.0 + phase.cos())).abs() < 1e-12, "{phase}: {e}");
        }
    }

    #[test]
    fn decay_scales_contrast_by_half_rate() {
        let params = EmitterParams::default();
        let config = RamseyConfig::default();
        let g = params.gamma_rad_per_ns();
        for t in [0.0, 3.0, 9.0] {
            let a = final_excited(&config, &params, 0.0, t, 0.0).unwrap() - 0.5;
            assert!((a - 0.5 * (-g * t / 2.0).exp()).abs() < 1e-12);
        }
    }

    #[test]
    fn finite_pulses_approach_ideal_when_strong() {
        let params = EmitterParams::default();
        let ideal = RamseyConfig::default();
        let finite = RamseyConfig { pulse: PulseSpec::Finite { power: 5e4 }, ..RamseyConfig::default() };
        for phase in ideal.phases() {
            let a = final_excited(&ideal, &params, 0.1, 4.0, phase).unwrap();
            let b = final_excited(&finite, &params, 0.1, 4.0, phase).unwrap();
            // residual from decay and detuning during the 0.11 ns pulses
            assert!((a - b).abs() < 0.02, "{a} {b}");
        }
    }

    #[test]
    fn mixed_reference_normalizes_to_one_half() {
        let params = no_ionization();
        let config = RamseyConfig { delays: vec![0.0], shots_per_point: 300, ..RamseyConfig::default() };
        let pts = run_ramsey(&config, &CrcConfig::default(), &params, 4, 1).unwrap();
        let full = readout_signal(1.0, &config, &params);
        for p in pts.iter().filter(|p| p.reference) {
            assert!((p.signal / full - 0.5).abs() < 1e-6, "{}", p.signal / full);
        }
        let a = analyze_ramsey(&pts);
        assert!(a.is_err() || a.unwrap().amplitudes.len() == 1);
    }

    /// The ensemble fringe amplitude equals `½ e^{-Γτ/2} |E[e^{iδτ}]|` over
    /// the heralded detunings.
    #[test]
    fn contrast_equals_heralded_mixture() {
        let params = no_ionization();
        let crc = CrcConfig::default();
        let config = RamseyConfig {
            delays: vec![0.0, 2.0, 4.0, 6.0, 8.0],
            shots_per_point: 1500,
            ..RamseyConfig::default()
        };
        let pts = run_ramsey(&config, &crc, &params, 5, 1).unwrap();
        let a = analyze_ramsey(&pts).unwrap();

        // independent heralded sample
        let mut rng = crate::io::rng::derive_stream(77, 0);
        let ds: Vec<f64> = (0..20_000)
            .filter_map(|_| {
                let (o, st) = crc_run(&EmitterState::dark(), &crc, &params, &mut rng).unwrap();
                o.heralded.then(|| mhz_to_rad_per_ns(st.center_detuning))
            })
            .collect();
        let g = params.gamma_rad_per_ns();
        for (t, amp) in a.delays.iter().zip(&a.amplitudes) {
            let m: Complex<f64> = ds.iter().map(|d| Complex::from_polar(1.0, d * t)).sum::<Complex<f64>>() / ds.len() as f64;
            let expect = 0.5 * (-g * t / 2.0).exp() * m.norm();
            assert!((amp - expect).abs() < 0.02 * 0.5 + 0.01, "τ={t}: {amp} vs {expect}");
        }
    }

    /// An unheralded Gaussian ensemble without radiative decay has a
    /// Gaussian envelope with `T2* = √2 / σ`.
    #[test]
    fn gaussian_ensemble_identity() {
        let params = EmitterParams { repump_max_prob: 1.0, ..no_ionization() };
        let crc = CrcConfig::with_thresholds(0, 0);
        let config = RamseyConfig {
            include_decay: false,
            initial_state: InitialState::Repumped,
            shots_per_point: 3000,
            ..RamseyConfig::default()
        };
        let a = analyze_ramsey(&run_ramsey(&config, &crc, &params, 6, 1).unwrap()).unwrap();
        let sigma = mhz_to_rad_per_ns(params.inhomogeneous_sigma);
        let expect = 2f64.sqrt() / sigma;
        assert!((a.t2_star() - expect).abs() < 0.05 * expect, "{} vs {expect}", a.t2_star());
        assert!((a.envelope.params[0] - 0.5).abs() < 0.03);
    }
}
