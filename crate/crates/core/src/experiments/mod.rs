//! Pulse-sequence harnesses producing raw shot records.
//!
//! Work is split into chains: a chain is a run of consecutive shots (or
//! scans) on one emitter, drawing from the stream `(seed, (domain, chain))`.
//! Chains are executed on a worker pool and merged in chain order, so the
//! output depends only on the configuration and the seed.

pub mod g2;
pub mod ple;
pub mod probes;
pub mod rabi;
pub mod ramsey;
pub mod sweep;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::rng::{derive_stream, stream_index, SimRng};
use crate::physics::params::EmitterParams;
use crate::physics::repump::repump_apply;
use crate::physics::state::EmitterState;

pub use g2::{run_g2, G2Config, G2Histogram};
pub use ple::{run_ple_scan, PleRow, PleScanConfig, RepumpPolicy};
pub use probes::{run_double_probe, run_probe_repump_probe, DoubleProbeConfig, PairRecord, PumpProbeConfig};
pub use rabi::{run_rabi, RabiConfig, RabiRecord};
pub use ramsey::{run_ramsey, RamseyConfig, RamseyPoint};
pub use sweep::{run_crc_sweep, CrcSweepConfig, SweepRow};

/// State of the emitter at the start of a chain (or of every shot when
/// shots are independent).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum InitialState {
    /// Ionized; a heralding loop begins by repumping.
    #[default]
    Dark,
    /// One strong repump applied before the first shot.
    Repumped,
}

impl InitialState {
    pub fn prepare(&self, params: &EmitterParams, rng: &mut SimRng) -> Result<EmitterState> {
        match self {
            Self::Dark => Ok(EmitterState::dark()),
            Self::Repumped => repump_apply(&EmitterState::dark(), f64::INFINITY, params, rng),
        }
    }
}

/// Run `n_items` items in chains of `chain_length`, `f(chain, range, rng)`
/// producing the records of one chain, on `n_workers` threads.
pub fn run_chains<T, F>(
    seed: u64,
    domain: u32,
    n_items: usize,
    chain_length: usize,
    n_workers: usize,
    f: F,
) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize, std::ops::Range<usize>, &mut SimRng) -> Result<Vec<T>> + Sync,
{
    if chain_length == 0 {
        return Err(Error::config("chain_length", "must be >= 1"));
    }
    let n_chains = n_items.div_ceil(chain_length);
    let work = |c: usize| {
        let start = c * chain_length;
        let end = (start + chain_length).min(n_items);
        let mut rng = derive_stream(seed, stream_index(domain, c as u64));
        f(c, start..end, &mut rng)
    };
    let chunks: Vec<Result<Vec<T>>> = if n_workers <= 1 {
        (0..n_chains).map(work).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(n_workers)
            .build()
            .map_err(|e| Error::InvalidArgument(format!("worker pool: {e}")))?;
        pool.install(|| (0..n_chains).into_par_iter().map(work).collect())
    };
    let mut out = Vec::with_capacity(n_items);
    for c in chunks {
        out.extend(c?);
    }
    Ok(out)
}

pub(crate) fn positive(field: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::config(field, format!("must be > 0, got {v}")))
    }
}

pub(crate) fn nonneg(field: &str, v: f64) -> Result<()> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::config(field, format!("must be >= 0, got {v}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::RngCore;

    #[test]
    fn chains_independent_of_worker_count() {
        let run = |w| {
            run_chains(5, 1, 103, 10, w, |c, range, rng| {
                Ok(range.map(|i| (c, i, rng.next_u64())).collect::<Vec<_>>())
            })
            .unwrap()
        };
        let a = run(1);
        assert_eq!(a.len(), 103);
        assert_eq!(a, run(4));
        assert_eq!(a, run(16));
        assert!(a.windows(2).all(|w| w[0].1 + 1 == w[1].1));
    }
}
