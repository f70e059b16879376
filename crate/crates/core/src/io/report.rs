//! Plot-ready data for the standard figure panels.

use clap::ValueEnum;
use statrs::distribution::{Discrete, Poisson};

use crate::analysis::stats::{center_statistics, pass_probability_curve};
use crate::crc::CrcConfig;
use crate::error::Result;
use crate::experiments::ple::RepumpPolicy;
use crate::experiments::probes::PairRecord;
use crate::experiments::rabi::{fit_trace, interval_traces};
use crate::experiments::ramsey::analyze_ramsey;
use crate::experiments::sweep::heralded_centers;
use crate::experiments::{
    run_crc_sweep, run_double_probe, run_ple_scan, run_rabi, run_ramsey, CrcSweepConfig, DoubleProbeConfig,
    PleScanConfig, RabiConfig, RamseyConfig,
};
use crate::physics::params::EmitterParams;

use super::config::{ExperimentConfig, RunConfig};
use super::record::{fmt_f64, Column, RecordFile, Table};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FigureId {
    /// PLE scans with conditional repumping.
    #[value(name = "1d")]
    Fig1d,
    /// Joint histograms of two consecutive probes at 10, 100, 200 nW.
    #[value(name = "2b")]
    Fig2b,
    /// Second-probe distribution given a bright first probe.
    #[value(name = "2c")]
    Fig2c,
    /// Pass probability against threshold.
    #[value(name = "2d")]
    Fig2d,
    /// Rabi traces grouped by probe counts.
    #[value(name = "3c")]
    Fig3c,
    /// PLE scans heralded at two thresholds.
    #[value(name = "4b")]
    Fig4b,
    /// Heralded linewidth against threshold.
    #[value(name = "4c")]
    Fig4c,
    /// Spectral steering with the probe setpoint.
    #[value(name = "4e")]
    Fig4e,
    /// Ramsey fringes.
    #[value(name = "5b")]
    Fig5b,
    /// T2* against threshold.
    #[value(name = "5c")]
    Fig5c,
}

impl FigureId {
    pub fn name(self) -> &'static str {
        match self {
            Self::Fig1d => "1d",
            Self::Fig2b => "2b",
            Self::Fig2c => "2c",
            Self::Fig2d => "2d",
            Self::Fig3c => "3c",
            Self::Fig4b => "4b",
            Self::Fig4c => "4c",
            Self::Fig4e => "4e",
            Self::Fig5b => "5b",
            Self::Fig5c => "5c",
        }
    }
}

fn record(id: FigureId, config: &RunConfig, table: Table) -> Result<RecordFile> {
    RecordFile::new(&format!("figure-{}", id.name()), config, table)
}

fn table(columns: &[(&str, &str)]) -> Table {
    Table::new(columns.iter().map(|(n, u)| Column::new(n, u)).collect())
}

fn run_config(seed: u64, workers: usize, experiment: ExperimentConfig) -> RunConfig {
    RunConfig {
        seed,
        n_workers: workers,
        ..RunConfig::new(experiment)
    }
}

fn double_probe(power: f64, p: &EmitterParams, seed: u64, workers: usize) -> Result<(DoubleProbeConfig, Vec<PairRecord>)> {
    let mut c = DoubleProbeConfig::default();
    c.probe.power = power;
    let pairs = run_double_probe(&c, p, seed, workers)?;
    Ok((c, pairs))
}

/// Produce the data behind one figure panel.
pub fn figure(id: FigureId, seed: u64, workers: usize) -> Result<RecordFile> {
    let p = EmitterParams::default();
    let crc = CrcConfig::default();
    match id {
        FigureId::Fig1d => {
            let c = PleScanConfig::default();
            let scan = run_ple_scan(&c, &crc, &p, seed, workers)?;
            let config = run_config(seed, workers, ExperimentConfig::Ple(c));
            record(id, &config, super::tables::ple_table(&scan))
        }
        FigureId::Fig2b => {
            let mut t = table(&[("power", "nW"), ("c1", "counts"), ("c2", "counts"), ("n", "1")]);
            let mut base = None;
            for power in [10.0, 100.0, 200.0] {
                let (c, pairs) = double_probe(power, &p, seed, workers)?;
                let mut cells: Vec<(u64, u64)> = pairs.iter().map(|r| (r.first, r.second)).collect();
                cells.sort_unstable();
                for chunk in cells.chunk_by(|a, b| a == b) {
                    t.push(vec![
                        fmt_f64(power),
                        chunk[0].0.to_string(),
                        chunk[0].1.to_string(),
                        chunk.len().to_string(),
                    ]);
                }
                base.get_or_insert(c);
            }
            let config = run_config(seed, workers, ExperimentConfig::Probe2(base.unwrap_or_default()));
            record(id, &config, t).map(|r| r.with_meta("powers_nw", "10,100,200"))
        }
        FigureId::Fig2c => {
            let (c, pairs) = double_probe(100.0, &p, seed, workers)?;
            let cond: Vec<u64> = pairs.iter().filter(|r| r.first > 100).map(|r| r.second).collect();
            let n = cond.len().max(1) as f64;
            let mean = cond.iter().sum::<u64>() as f64 / n;
            let max = cond.iter().copied().max().unwrap_or(0);
            let pois = Poisson::new(mean.max(1e-12)).expect("positive mean");
            let mut t = table(&[("c2", "counts"), ("frequency", "1"), ("poisson", "1")]);
            for k in 0..=max {
                let f = cond.iter().filter(|&&x| x == k).count() as f64 / n;
                t.push(vec![k.to_string(), fmt_f64(f), fmt_f64(pois.pmf(k))]);
            }
            let config = run_config(seed, workers, ExperimentConfig::Probe2(c));
            record(id, &config, t).map(|r| r.with_meta("conditional_mean", fmt_f64(mean)).with_meta("n", cond.len()))
        }
        FigureId::Fig2d => {
            let (c, pairs) = double_probe(100.0, &p, seed, workers)?;
            let first: Vec<u64> = pairs.iter().map(|r| r.first).collect();
            let thresholds: Vec<u64> = (0..=300).collect();
            let mut t = table(&[("threshold", "counts"), ("p_pass", "1")]);
            for (th, pr) in pass_probability_curve(&first, &thresholds) {
                t.push(vec![th.to_string(), fmt_f64(pr)]);
            }
            let config = run_config(seed, workers, ExperimentConfig::Probe2(c));
            record(id, &config, t)
        }
        FigureId::Fig3c => {
            let c = RabiConfig::default();
            let records = run_rabi(&c, &crc, &p, seed, workers)?;
            let times = c.times();
            let mut t = table(&[
                ("interval_lo", "counts"),
                ("interval_hi", "counts"),
                ("time", "ns"),
                ("mean", "counts"),
                ("fit", "counts"),
            ]);
            for trace in interval_traces(&records, &c.intervals) {
                let fit = fit_trace(&times, &trace).ok().filter(|f| f.converged);
                for (tm, m) in times.iter().zip(&trace.mean) {
                    let y = fit.as_ref().map_or(f64::NAN, |f| f.model.eval(*tm, &f.params));
                    t.push(vec![
                        trace.interval.lo.to_string(),
                        trace.interval.hi.map_or("inf".into(), |h| h.to_string()),
                        fmt_f64(*tm),
                        fmt_f64(*m),
                        fmt_f64(y),
                    ]);
                }
            }
            let config = run_config(seed, workers, ExperimentConfig::Rabi(c));
            record(id, &config, t)
        }
        FigureId::Fig4b => {
            let c = PleScanConfig {
                policy: RepumpPolicy::CrcBeforeScan,
                n_scans: 200,
                ..Default::default()
            };
            let mut t = table(&[("c_pass", "counts"), ("scan", "1"), ("frequency", "MHz"), ("counts", "counts")]);
            for c_pass in [50, 110] {
                let crc = CrcConfig::with_thresholds(c_pass, crc.c_repump);
                let scan = run_ple_scan(&c, &crc, &p, seed, workers)?;
                for row in &scan.rows {
                    for (f, k) in scan.frequencies.iter().zip(&row.counts) {
                        t.push(vec![c_pass.to_string(), row.scan.to_string(), fmt_f64(*f), k.to_string()]);
                    }
                }
            }
            let mut config = run_config(seed, workers, ExperimentConfig::Ple(c));
            config.crc = Some(crc);
            record(id, &config, t).map(|r| r.with_meta("c_pass_values", "50,110"))
        }
        FigureId::Fig4c | FigureId::Fig4e => {
            let (c, emitter) = if id == FigureId::Fig4c {
                (CrcSweepConfig::default(), p)
            } else {
                (
                    CrcSweepConfig {
                        c_pass_values: vec![crc.c_pass],
                        offsets: vec![-100.0, -50.0, 0.0, 50.0, 100.0],
                        ..Default::default()
                    },
                    EmitterParams::waveguide(),
                )
            };
            let rows = run_crc_sweep(&c, &crc, &emitter, seed, workers)?;
            let mut t = table(&[
                ("c_pass", "counts"),
                ("offset", "MHz"),
                ("n_heralded", "1"),
                ("center_mean", "MHz"),
                ("center_mean_err", "MHz"),
                ("center_std", "MHz"),
                ("center_std_err", "MHz"),
            ]);
            for (s, offset) in c.settings(&crc) {
                let centers = heralded_centers(&rows, s.c_pass, offset);
                let n = centers.len();
                let mean = centers.iter().sum::<f64>() / n.max(1) as f64;
                let (sd, sde) = center_statistics(&centers).unwrap_or((f64::NAN, f64::NAN));
                t.push(vec![
                    s.c_pass.to_string(),
                    fmt_f64(offset),
                    n.to_string(),
                    fmt_f64(mean),
                    fmt_f64(sd / (n.max(1) as f64).sqrt()),
                    fmt_f64(sd),
                    fmt_f64(sde),
                ]);
            }
            let mut config = run_config(seed, workers, ExperimentConfig::CrcSweep(c));
            config.emitter = emitter;
            config.crc = Some(crc);
            record(id, &config, t)
        }
        FigureId::Fig5b => {
            let c = RamseyConfig::default();
            let points = run_ramsey(&c, &crc, &p, seed, workers)?;
            let a = analyze_ramsey(&points)?;
            let mut t = table(&[("delay", "ns"), ("phase", "rad"), ("normalized", "1"), ("normalized_err", "1")]);
            for pt in points.iter().filter(|pt| !pt.reference) {
                let norm = 2.0 * a.mixed_signal;
                t.push(vec![
                    fmt_f64(pt.delay),
                    fmt_f64(pt.phase),
                    fmt_f64(pt.signal / norm),
                    fmt_f64(pt.signal_stderr / norm),
                ]);
            }
            let config = run_config(seed, workers, ExperimentConfig::Ramsey(c));
            record(id, &config, t).map(|r| r.with_meta("t2_star_ns", fmt_f64(a.t2_star())))
        }
        FigureId::Fig5c => {
            let c = RamseyConfig::default();
            let mut t = table(&[("c_pass", "counts"), ("t2_star", "ns"), ("t2_star_err", "ns")]);
            for c_pass in [10, 60, 110] {
                let crc = CrcConfig::with_thresholds(c_pass, crc.c_repump.min(c_pass));
                let a = analyze_ramsey(&run_ramsey(&c, &crc, &p, seed, workers)?)?;
                t.push(vec![c_pass.to_string(), fmt_f64(a.t2_star()), fmt_f64(a.t2_star_err())]);
            }
            let config = run_config(seed, workers, ExperimentConfig::Ramsey(c));
            record(id, &config, t)
        }
    }
}
