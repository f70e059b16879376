//! Conversions between harness outputs and record tables.

use crate::crc::CrcOutcome;
use crate::error::{Error, Result};
use crate::experiments::g2::G2Histogram;
use crate::experiments::ple::{PleRow, PleScan};
use crate::experiments::probes::PairRecord;
use crate::experiments::rabi::RabiRecord;
use crate::experiments::ramsey::RamseyPoint;
use crate::experiments::sweep::SweepRow;

use super::record::{fmt_f64, Column, Table};

fn cols(columns: &[(&str, &str)]) -> Vec<Column> {
    columns.iter().map(|(n, u)| Column::new(n, u)).collect()
}

const PLE_COLUMNS: [(&str, &str); 13] = [
    ("scan", "1"),
    ("step", "1"),
    ("frequency", "MHz"),
    ("counts", "counts"),
    ("flagged", "bool"),
    ("bright_at_start", "bool"),
    ("center_at_start", "MHz"),
    ("crc_heralded", "bool"),
    ("crc_attempts", "1"),
    ("crc_repumps", "1"),
    ("crc_final_counts", "counts"),
    ("crc_heralded_detuning", "MHz"),
    ("crc_elapsed", "us"),
];

pub fn ple_table(scan: &PleScan) -> Table {
    let mut t = Table::new(cols(&PLE_COLUMNS));
    for row in &scan.rows {
        let crc: [String; 6] = match row.crc {
            Some(o) => [
                o.heralded.to_string(),
                o.attempts.to_string(),
                o.repumps.to_string(),
                o.final_counts.to_string(),
                fmt_f64(o.heralded_detuning),
                fmt_f64(o.elapsed),
            ],
            None => Default::default(),
        };
        for (k, (f, c)) in scan.frequencies.iter().zip(&row.counts).enumerate() {
            let mut r = vec![
                row.scan.to_string(),
                k.to_string(),
                fmt_f64(*f),
                c.to_string(),
                row.flagged.to_string(),
                row.bright_at_start.to_string(),
                fmt_f64(row.center_at_start),
            ];
            r.extend(crc.iter().cloned());
            t.push(r);
        }
    }
    t
}

pub fn ple_from_table(t: &Table) -> Result<PleScan> {
    let scan: Vec<usize> = t.column("scan")?;
    let step: Vec<usize> = t.column("step")?;
    let freq: Vec<f64> = t.column("frequency")?;
    let counts: Vec<u64> = t.column("counts")?;
    let flagged: Vec<bool> = t.column("flagged")?;
    let bright: Vec<bool> = t.column("bright_at_start")?;
    let center: Vec<f64> = t.column("center_at_start")?;
    let crc_idx: Vec<usize> = PLE_COLUMNS[7..].iter().map(|(n, _)| t.index(n)).collect::<Result<_>>()?;
    let mut rows: Vec<PleRow> = Vec::new();
    let mut frequencies = Vec::new();
    for i in 0..t.rows.len() {
        if step[i] == 0 {
            let raw = &t.rows[i];
            let crc = if raw[crc_idx[0]].is_empty() {
                None
            } else {
                let p = |k: usize| raw[crc_idx[k]].as_str();
                let bad = |k: usize| Error::Record(format!("row {i}: bad `{}`", PLE_COLUMNS[7 + k].0));
                Some(CrcOutcome {
                    heralded: p(0).parse().map_err(|_| bad(0))?,
                    attempts: p(1).parse().map_err(|_| bad(1))?,
                    repumps: p(2).parse().map_err(|_| bad(2))?,
                    final_counts: p(3).parse().map_err(|_| bad(3))?,
                    heralded_detuning: p(4).parse().map_err(|_| bad(4))?,
                    elapsed: p(5).parse().map_err(|_| bad(5))?,
                })
            };
            rows.push(PleRow {
                scan: scan[i],
                bright_at_start: bright[i],
                center_at_start: center[i],
                flagged: flagged[i],
                crc,
                counts: Vec::new(),
            });
        }
        let row = rows
            .last_mut()
            .ok_or_else(|| Error::Record("first PLE row does not start a scan".into()))?;
        if step[i] != row.counts.len() || scan[i] != row.scan {
            return Err(Error::Record(format!("row {i}: steps out of order")));
        }
        row.counts.push(counts[i]);
        if rows.len() == 1 {
            frequencies.push(freq[i]);
        }
    }
    if rows.iter().any(|r| r.counts.len() != frequencies.len()) {
        return Err(Error::Record("scans have unequal step counts".into()));
    }
    Ok(PleScan { frequencies, rows })
}

pub fn pairs_table(pairs: &[PairRecord], first: &str, second: &str) -> Table {
    let mut t = Table::new(cols(&[("shot", "1"), (first, "counts"), (second, "counts")]));
    for p in pairs {
        t.push(vec![p.shot.to_string(), p.first.to_string(), p.second.to_string()]);
    }
    t
}

pub fn pairs_from_table(t: &Table) -> Result<Vec<PairRecord>> {
    if t.columns.len() != 3 {
        return Err(Error::Record("pair records need exactly 3 columns".into()));
    }
    let shot: Vec<usize> = t.column("shot")?;
    let a: Vec<u64> = t.column(&t.columns[1].name)?;
    let b: Vec<u64> = t.column(&t.columns[2].name)?;
    Ok((0..shot.len())
        .map(|i| PairRecord {
            shot: shot[i],
            first: a[i],
            second: b[i],
        })
        .collect())
}

pub fn rabi_table(records: &[RabiRecord]) -> Table {
    let n_bins = records.first().map_or(0, |r| r.bins.len());
    let mut c = cols(&[("sequence", "1"), ("probe_counts", "counts"), ("heralded", "bool"), ("attempts", "1")]);
    c.extend((0..n_bins).map(|k| Column::new(&format!("bin_{k}"), "counts")));
    let mut t = Table::new(c);
    for r in records {
        let mut row = vec![
            r.sequence.to_string(),
            r.probe_counts.to_string(),
            r.heralded.to_string(),
            r.attempts.to_string(),
        ];
        row.extend(r.bins.iter().map(u64::to_string));
        t.push(row);
    }
    t
}

pub fn rabi_from_table(t: &Table) -> Result<Vec<RabiRecord>> {
    let seq: Vec<usize> = t.column("sequence")?;
    let probe: Vec<u64> = t.column("probe_counts")?;
    let heralded: Vec<bool> = t.column("heralded")?;
    let attempts: Vec<u64> = t.column("attempts")?;
    let n_bins = t.columns.len() - 4;
    let bins: Vec<Vec<u64>> = (0..n_bins).map(|k| t.column(&format!("bin_{k}"))).collect::<Result<_>>()?;
    Ok((0..seq.len())
        .map(|i| RabiRecord {
            sequence: seq[i],
            probe_counts: probe[i],
            heralded: heralded[i],
            attempts: attempts[i],
            bins: bins.iter().map(|b| b[i]).collect(),
        })
        .collect())
}

pub fn ramsey_table(points: &[RamseyPoint]) -> Table {
    let mut t = Table::new(cols(&[
        ("delay", "ns"),
        ("phase", "rad"),
        ("reference", "bool"),
        ("signal", "counts"),
        ("signal_stderr", "counts"),
        ("heralded", "1"),
        ("mean_attempts", "1"),
        ("mean_probe_counts", "counts"),
    ]));
    for p in points {
        t.push(vec![
            fmt_f64(p.delay),
            fmt_f64(p.phase),
            p.reference.to_string(),
            fmt_f64(p.signal),
            fmt_f64(p.signal_stderr),
            p.heralded.to_string(),
            fmt_f64(p.mean_attempts),
            fmt_f64(p.mean_probe_counts),
        ]);
    }
    t
}

pub fn ramsey_from_table(t: &Table) -> Result<Vec<RamseyPoint>> {
    let delay: Vec<f64> = t.column("delay")?;
    let phase: Vec<f64> = t.column("phase")?;
    let reference: Vec<bool> = t.column("reference")?;
    let signal: Vec<f64> = t.column("signal")?;
    let stderr: Vec<f64> = t.column("signal_stderr")?;
    let heralded: Vec<usize> = t.column("heralded")?;
    let attempts: Vec<f64> = t.column("mean_attempts")?;
    let probe: Vec<f64> = t.column("mean_probe_counts")?;
    Ok((0..delay.len())
        .map(|i| RamseyPoint {
            delay: delay[i],
            phase: phase[i],
            reference: reference[i],
            signal: signal[i],
            signal_stderr: stderr[i],
            heralded: heralded[i],
            mean_attempts: attempts[i],
            mean_probe_counts: probe[i],
        })
        .collect())
}

pub fn g2_table(h: &G2Histogram) -> Table {
    let mut t = Table::new(cols(&[("delay", "ns"), ("pairs", "1"), ("normalized", "1")]));
    for ((d, p), n) in h.delays.iter().zip(&h.pairs).zip(&h.normalized) {
        t.push(vec![fmt_f64(*d), p.to_string(), fmt_f64(*n)]);
    }
    t
}

pub fn g2_from_table(t: &Table, n_photons: u64) -> Result<G2Histogram> {
    Ok(G2Histogram {
        delays: t.column("delay")?,
        pairs: t.column("pairs")?,
        normalized: t.column("normalized")?,
        n_photons,
    })
}

pub fn sweep_table(rows: &[SweepRow]) -> Table {
    let mut t = Table::new(cols(&[
        ("c_pass", "counts"),
        ("offset", "MHz"),
        ("run", "1"),
        ("heralded", "bool"),
        ("attempts", "1"),
        ("repumps", "1"),
        ("final_counts", "counts"),
        ("heralded_detuning", "MHz"),
        ("elapsed", "us"),
    ]));
    for r in rows {
        let o = &r.outcome;
        t.push(vec![
            r.c_pass.to_string(),
            fmt_f64(r.offset),
            r.run.to_string(),
            o.heralded.to_string(),
            o.attempts.to_string(),
            o.repumps.to_string(),
            o.final_counts.to_string(),
            fmt_f64(o.heralded_detuning),
            fmt_f64(o.elapsed),
        ]);
    }
    t
}

pub fn sweep_from_table(t: &Table) -> Result<Vec<SweepRow>> {
    let c_pass: Vec<u64> = t.column("c_pass")?;
    let offset: Vec<f64> = t.column("offset")?;
    let run: Vec<usize> = t.column("run")?;
    let heralded: Vec<bool> = t.column("heralded")?;
    let attempts: Vec<u64> = t.column("attempts")?;
    let repumps: Vec<u64> = t.column("repumps")?;
    let final_counts: Vec<u64> = t.column("final_counts")?;
    let det: Vec<f64> = t.column("heralded_detuning")?;
    let elapsed: Vec<f64> = t.column("elapsed")?;
    Ok((0..c_pass.len())
        .map(|i| SweepRow {
            c_pass: c_pass[i],
            offset: offset[i],
            run: run[i],
            outcome: CrcOutcome {
                heralded: heralded[i],
                attempts: attempts[i],
                repumps: repumps[i],
                final_counts: final_counts[i],
                heralded_detuning: det[i],
                elapsed: elapsed[i],
            },
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crc::CrcConfig;
    use crate::experiments::ple::{run_ple_scan, PleScanConfig, RepumpPolicy};
    use crate::physics::params::EmitterParams;

    #[test]
    fn ple_round_trip() {
        let c = PleScanConfig { n_scans: 3, policy: RepumpPolicy::CrcBeforeScan, ..Default::default() };
        let scan = run_ple_scan(&c, &CrcConfig::default(), &EmitterParams::default(), 1, 1).unwrap();
        assert_eq!(ple_from_table(&ple_table(&scan)).unwrap(), scan);
        let c = PleScanConfig { n_scans: 3, ..Default::default() };
        let scan = run_ple_scan(&c, &CrcConfig::default(), &EmitterParams::default(), 1, 1).unwrap();
        assert_eq!(ple_from_table(&ple_table(&scan)).unwrap(), scan);
    }

    #[test]
    fn small_tables_round_trip() {
        let pairs = vec![PairRecord { shot: 0, first: 3, second: 4 }];
        assert_eq!(pairs_from_table(&pairs_table(&pairs, "c3", "c4")).unwrap(), pairs);
        let rabi = vec![RabiRecord { sequence: 0, probe_counts: 9, heralded: true, attempts: 2, bins: vec![1, 2, 3] }];
        assert_eq!(rabi_from_table(&rabi_table(&rabi)).unwrap(), rabi);
        let pt = RamseyPoint {
            delay: 1.0,
            phase: 0.785,
            reference: false,
            signal: 1e-3,
            signal_stderr: 1e-5,
            heralded: 10,
            mean_attempts: 3.5,
            mean_probe_counts: 120.0,
        };
        assert_eq!(ramsey_from_table(&ramsey_table(&[pt])).unwrap(), vec![pt]);
        let h = G2Histogram { delays: vec![0.125], pairs: vec![4], normalized: vec![0.01], n_photons: 77 };
        assert_eq!(g2_from_table(&g2_table(&h), 77).unwrap(), h);
        let sw = vec![SweepRow {
            c_pass: 110,
            offset: -50.0,
            run: 3,
            outcome: CrcOutcome {
                heralded: true,
                attempts: 4,
                repumps: 2,
                final_counts: 120,
                heralded_detuning: 1.5,
                elapsed: 3000.0,
            },
        }];
        assert_eq!(sweep_from_table(&sweep_table(&sw)).unwrap(), sw);
    }
}
