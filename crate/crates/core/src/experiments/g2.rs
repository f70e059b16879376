//! Photon streams under continuous resonant drive and their delay
//! histogram.

use rand::Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::analysis::fits::fit_g2;
use crate::analysis::lsq::FitResult;
use crate::error::{Error, Result};
use crate::io::units;
use crate::physics::g2::{g2_oscillation, WaitingTimeSampler};
use crate::physics::optics::scattering_rate;
use crate::physics::params::EmitterParams;
use crate::physics::state::{mhz_to_rad_per_ns, DriveField};

use super::{nonneg, positive, run_chains};

const DOMAIN: u32 = 6;

/// Uncorrelated background added to the detected stream.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Background {
    #[default]
    None,
    Rate {
        #[serde(with = "units::per_s")]
        rate: f64,
    },
    /// Background rate chosen so that the zero-delay value of the measured
    /// correlation equals `g2_zero`.
    TargetG2Zero { g2_zero: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct G2Config {
    #[serde(with = "units::nw")]
    pub drive_power: f64,
    /// Laser minus emitter.
    #[serde(with = "units::mhz")]
    pub detuning: f64,
    #[serde(with = "units::ns")]
    pub total_time: f64,
    /// Independent stretches of the stream, each on its own RNG stream.
    #[serde(with = "units::ns")]
    pub chunk_time: f64,
    #[serde(with = "units::ns")]
    pub bin_width: f64,
    #[serde(with = "units::ns")]
    pub max_delay: f64,
    /// Bins at or beyond this delay define the normalization plateau.
    #[serde(with = "units::ns")]
    pub plateau_start: f64,
    /// Fraction of emitted photons detected.
    pub collection_efficiency: f64,
    pub background: Background,
}

impl Default for G2Config {
    fn default() -> Self {
        Self {
            drive_power: 80.0,
            detuning: 0.0,
            total_time: 5.0e6,
            chunk_time: 1.0e5,
            bin_width: 0.25,
            max_delay: 100.0,
            plateau_start: 60.0,
            collection_efficiency: 1.0,
            background: Background::None,
        }
    }
}

impl G2Config {
    pub fn validate(&self) -> Result<()> {
        positive("experiment.drive_power", self.drive_power)?;
        positive("experiment.total_time", self.total_time)?;
        positive("experiment.chunk_time", self.chunk_time)?;
        positive("experiment.bin_width", self.bin_width)?;
        positive("experiment.max_delay", self.max_delay)?;
        if !(self.plateau_start < self.max_delay) {
            return Err(Error::config("experiment.plateau_start", "must be below max_delay"));
        }
        if !(self.collection_efficiency > 0.0 && self.collection_efficiency <= 1.0) {
            return Err(Error::config("experiment.collection_efficiency", "must be in (0, 1]"));
        }
        if !self.detuning.is_finite() {
            return Err(Error::config("experiment.detuning", "must be finite"));
        }
        match self.background {
            Background::Rate { rate } => nonneg("experiment.background.rate", rate)?,
            Background::TargetG2Zero { g2_zero } if !(0.0..1.0).contains(&g2_zero) => {
                return Err(Error::config("experiment.background.g2_zero", "must be in [0, 1)"));
            }
            _ => {}
        }
        Ok(())
    }

    fn drive(&self, params: &EmitterParams) -> Result<DriveField> {
        DriveField::new(params, self.detuning, self.drive_power, 0.0, self.total_time)
    }

    /// Detected signal rate, 1/ns.
    pub fn signal_rate(&self, params: &EmitterParams) -> Result<f64> {
        let r = scattering_rate(self.detuning, params.saturation(self.drive_power), params)?;
        Ok(r * 1e-9 * self.collection_efficiency)
    }

    /// Background rate, 1/ns.
    pub fn background_rate(&self, params: &EmitterParams) -> Result<f64> {
        Ok(match self.background {
            Background::None => 0.0,
            Background::Rate { rate } => rate * 1e-9,
            Background::TargetG2Zero { g2_zero } => {
                // g(0) = 1 - ρ² with ρ = S / (S + B)
                let rho = (1.0 - g2_zero).sqrt();
                self.signal_rate(params)? * (1.0 - rho) / rho
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct G2Histogram {
    /// Bin centers, ns.
    pub delays: Vec<f64>,
    /// Ordered photon pairs per delay bin.
    pub pairs: Vec<u64>,
    /// `pairs` over the plateau mean.
    pub normalized: Vec<f64>,
    pub n_photons: u64,
}

fn chunk_stream<R: Rng + ?Sized>(
    length: f64,
    sampler: &WaitingTimeSampler,
    efficiency: f64,
    background: f64,
    rng: &mut R,
) -> Vec<f64> {
    let mut times = Vec::new();
    let mut t = sampler.sample(rng);
    while t < length {
        if efficiency >= 1.0 || rng.random::<f64>() < efficiency {
            times.push(t);
        }
        t += sampler.sample(rng);
    }
    if background > 0.0 {
        let gap = Exp::new(background).expect("positive background");
        let mut t = gap.sample(rng);
        while t < length {
            times.push(t);
            t += gap.sample(rng);
        }
        times.sort_by(f64::total_cmp);
    }
    times
}

fn accumulate(times: &[f64], bin: f64, max_delay: f64, hist: &mut [u64]) {
    for (i, t0) in times.iter().enumerate() {
        for t1 in &times[i + 1..] {
            let d = t1 - t0;
            if d >= max_delay {
                break;
            }
            let k = (d / bin) as usize;
            if k < hist.len() {
                hist[k] += 1;
            }
        }
    }
}

pub fn run_g2(config: &G2Config, params: &EmitterParams, seed: u64, n_workers: usize) -> Result<G2Histogram> {
    config.validate()?;
    params.validate()?;
    let sampler = WaitingTimeSampler::new(&config.drive(params)?.bloch(params))?;
    let background = config.background_rate(params)?;
    let n_bins = (config.max_delay / config.bin_width + 1e-9).floor() as usize;
    let n_chunks = (config.total_time / config.chunk_time).ceil() as usize;
    let chunks = run_chains(seed, DOMAIN, n_chunks, 1, n_workers, |c, _, rng| {
        let length = (config.total_time - c as f64 * config.chunk_time).min(config.chunk_time);
        let times = chunk_stream(length, &sampler, config.collection_efficiency, background, rng);
        let mut hist = vec![0u64; n_bins];
        accumulate(&times, config.bin_width, config.max_delay, &mut hist);
        Ok(vec![(hist, times.len() as u64)])
    })?;
    let mut pairs = vec![0u64; n_bins];
    let mut n_photons = 0;
    for (h, n) in chunks {
        for (p, v) in pairs.iter_mut().zip(h) {
            *p += v;
        }
        n_photons += n;
    }
    let delays: Vec<f64> = (0..n_bins).map(|k| (k as f64 + 0.5) * config.bin_width).collect();
    let plateau: Vec<u64> = delays
        .iter()
        .zip(&pairs)
        .filter(|(d, _)| **d >= config.plateau_start)
        .map(|(_, p)| *p)
        .collect();
    let level = plateau.iter().sum::<u64>() as f64 / plateau.len().max(1) as f64;
    if !(level > 0.0) {
        return Err(Error::InvalidInput("no photon pairs on the normalization plateau".into()));
    }
    let normalized = pairs.iter().map(|p| *p as f64 / level).collect();
    Ok(G2Histogram { delays, pairs, normalized, n_photons })
}

/// Fit the contrast-scaled two-level model to a histogram, seeded from the
/// nominal drive.
pub fn fit_histogram(hist: &G2Histogram, config: &G2Config, params: &EmitterParams) -> Result<FitResult<f64>> {
    let gamma = params.gamma_rad_per_ns();
    let rabi = mhz_to_rad_per_ns(params.rabi_frequency(config.drive_power));
    let omega = g2_oscillation(rabi, gamma).unwrap_or(gamma);
    let level = hist.pairs.iter().zip(&hist.normalized).find(|(p, _)| **p > 0).map_or(1.0, |(p, n)| *p as f64 / n);
    let weights: Vec<f64> = hist.pairs.iter().map(|p| level * level / (*p as f64).max(1.0)).collect();
    fit_g2(&hist.delays, &hist.normalized, Some(&weights), [gamma, omega, 1.0])
}
