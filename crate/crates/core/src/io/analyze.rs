//! `analyze fit` and `analyze stats` over record files.

use crate::analysis::fits::{fit_lorentzian, g2_zero, PeakOptions};
use crate::analysis::lsq::FitResult;
use crate::analysis::stats::{
    band_occupancy, center_statistics, dispersion_test, fano_factor, ks_two_sample, pearson_counts,
};
use crate::error::{Error, Result};
use crate::experiments::g2::fit_histogram;
use crate::experiments::ple::{label_scan, PleScan, Regime, RepumpPolicy};
use crate::experiments::probes::{recovery_probability, PairRecord};
use crate::experiments::rabi::{fit_trace, interval_traces};
use crate::experiments::ramsey::analyze_ramsey;
use crate::experiments::sweep::heralded_centers;

use super::config::{ExperimentConfig, RunConfig};
use super::record::{fmt_f64, Column, RecordFile, Table};
use super::tables;

#[derive(Debug, Clone, Default)]
pub struct AnalyzeOptions {
    /// PLE fit window, MHz.
    pub window: Option<(f64, f64)>,
}

fn summary(input: &RecordFile, kind: &str, table: Table) -> RecordFile {
    RecordFile {
        kind: format!("{kind}:{}", input.kind),
        seed: input.seed,
        config_text: input.config_text.clone(),
        meta: Vec::new(),
        table,
    }
}

fn source(input: &RecordFile) -> Result<RunConfig> {
    let config = input.config()?;
    if config.experiment.kind() != input.kind {
        return Err(Error::Record(format!(
            "record kind `{}` does not match its embedded config `{}`",
            input.kind,
            config.experiment.kind()
        )));
    }
    Ok(config)
}

fn param_columns(fit_names: &[&str], units: &[&str]) -> Vec<Column> {
    let mut c = Vec::new();
    for (n, u) in fit_names.iter().zip(units) {
        c.push(Column::new(n, u));
        c.push(Column::new(&format!("{n}_err"), u));
    }
    c
}

fn param_values(fit: &FitResult<f64>) -> Vec<String> {
    fit.params
        .iter()
        .zip(&fit.stderr)
        .flat_map(|(p, e)| [fmt_f64(*p), fmt_f64(*e)])
        .collect()
}

/// Per-scan Lorentzian fits of a PLE record.
pub fn ple_fits(scan: &PleScan, window: Option<(f64, f64)>) -> Vec<Result<FitResult<f64>>> {
    let opts = PeakOptions { window, uniform_weights: false };
    scan.rows
        .iter()
        .map(|r| {
            let ys: Vec<f64> = r.counts.iter().map(|c| *c as f64).collect();
            fit_lorentzian(&scan.frequencies, &ys, &opts)
        })
        .collect()
}

fn flat_rule(config: &RunConfig) -> (f64, u64) {
    match &config.experiment {
        ExperimentConfig::Ple(p) => match p.policy {
            RepumpPolicy::ConditionalThreshold { factor, min_peak, .. } => (factor, min_peak),
            _ => (1.5, 5),
        },
        _ => (1.5, 5),
    }
}

/// Centers of the scans that show a peak and fit cleanly.
pub fn ple_centers(scan: &PleScan, fits: &[Result<FitResult<f64>>], factor: f64, min_peak: u64) -> Vec<f64> {
    scan.rows
        .iter()
        .zip(fits)
        .filter(|(r, _)| label_scan(&scan.frequencies, &r.counts, factor, min_peak, 100.0) != Regime::Dark)
        .filter_map(|(_, f)| f.as_ref().ok().filter(|f| f.converged).map(|f| f.params[1]))
        .collect()
}

pub fn analyze_fit(input: &RecordFile, opts: &AnalyzeOptions) -> Result<RecordFile> {
    let config = source(input)?;
    let t = &input.table;
    match &config.experiment {
        ExperimentConfig::Ple(_) => {
            let scan = tables::ple_from_table(t)?;
            let kind = crate::analysis::models::ModelKind::LorentzianPeak;
            let mut cols = vec![Column::new("scan", "1"), Column::new("converged", "bool")];
            cols.extend(param_columns(kind.names(), kind.units()));
            let mut out = Table::new(cols);
            for (row, fit) in scan.rows.iter().zip(ple_fits(&scan, opts.window)) {
                let mut r = vec![row.scan.to_string()];
                match fit {
                    Ok(f) => {
                        r.push(f.converged.to_string());
                        r.extend(param_values(&f));
                    }
                    Err(_) => {
                        r.push("false".into());
                        r.extend(std::iter::repeat_n("NaN".to_string(), 8));
                    }
                }
                out.push(r);
            }
            Ok(summary(input, "fit", out))
        }
        ExperimentConfig::Rabi(c) => {
            let records = tables::rabi_from_table(t)?;
            let times = c.times();
            let kind = crate::analysis::models::ModelKind::DampedSine;
            let mut cols = vec![
                Column::new("interval_lo", "counts"),
                Column::new("interval_hi", "counts"),
                Column::new("n_sequences", "1"),
                Column::new("converged", "bool"),
            ];
            cols.extend(param_columns(kind.names(), kind.units()));
            let mut out = Table::new(cols);
            for trace in interval_traces(&records, &c.intervals) {
                let mut r = vec![
                    trace.interval.lo.to_string(),
                    trace.interval.hi.map_or("inf".into(), |h| h.to_string()),
                    trace.n_sequences.to_string(),
                ];
                match fit_trace(&times, &trace) {
                    Ok(f) if trace.n_sequences > 0 => {
                        r.push(f.converged.to_string());
                        r.extend(param_values(&f));
                    }
                    _ => {
                        r.push("false".into());
                        r.extend(std::iter::repeat_n("NaN".to_string(), 10));
                    }
                }
                out.push(r);
            }
            Ok(summary(input, "fit", out))
        }
        ExperimentConfig::Ramsey(_) => {
            let a = analyze_ramsey(&tables::ramsey_from_table(t)?)?;
            let mut out = Table::new(vec![
                Column::new("delay", "ns"),
                Column::new("amplitude", "1"),
                Column::new("amplitude_err", "1"),
            ]);
            for ((d, amp), e) in a.delays.iter().zip(&a.amplitudes).zip(&a.amplitude_errors) {
                out.push(vec![fmt_f64(*d), fmt_f64(*amp), fmt_f64(*e)]);
            }
            Ok(summary(input, "fit", out)
                .with_meta("t2_star_ns", fmt_f64(a.t2_star()))
                .with_meta("t2_star_err_ns", fmt_f64(a.t2_star_err()))
                .with_meta("envelope_amplitude", fmt_f64(a.envelope.params[0]))
                .with_meta("envelope_converged", a.envelope.converged)
                .with_meta("mixed_signal", fmt_f64(a.mixed_signal)))
        }
        ExperimentConfig::G2(c) => {
            let n: u64 = input.meta("n_photons").and_then(|v| v.parse().ok()).unwrap_or(0);
            let h = tables::g2_from_table(t, n)?;
            let fit = fit_histogram(&h, c, &config.emitter)?;
            let kind = crate::analysis::models::ModelKind::G2Model;
            let mut cols = vec![Column::new("converged", "bool")];
            cols.extend(param_columns(kind.names(), kind.units()));
            cols.push(Column::new("g2_zero", "1"));
            let mut out = Table::new(cols);
            let mut r = vec![fit.converged.to_string()];
            r.extend(param_values(&fit));
            r.push(fmt_f64(g2_zero(&fit)));
            out.push(r);
            Ok(summary(input, "fit", out))
        }
        _ => Err(Error::InvalidInput(format!(
            "no fit is defined for `{}` records; use `analyze stats`",
            input.kind
        ))),
    }
}

struct Stats(Table);

impl Stats {
    fn new() -> Self {
        Self(Table::new(vec![
            Column::new("group", "1"),
            Column::new("quantity", "1"),
            Column::new("value", "unit"),
            Column::new("stderr", "unit"),
            Column::new("unit", "1"),
        ]))
    }

    fn add(&mut self, group: &str, q: &str, v: f64, e: Option<f64>, unit: &str) {
        self.0.push(vec![
            group.into(),
            q.into(),
            fmt_f64(v),
            e.map_or(String::new(), fmt_f64),
            unit.into(),
        ]);
    }
}

fn pair_stats(st: &mut Stats, pairs: &[PairRecord], pump: bool) -> Result<()> {
    let n = pairs.len() as f64;
    let cs: Vec<(u64, u64)> = pairs.iter().map(|p| (p.first, p.second)).collect();
    if let Some(r) = pearson_counts(&cs) {
        st.add("all", "pearson_r", r, Some((1.0 - r * r) / (n - 1.0).sqrt()), "1");
    }
    st.add("all", "band_occupancy", band_occupancy(&cs), None, "1");
    if pump {
        if let Some(p) = recovery_probability(pairs, 20) {
            let k = pairs.iter().filter(|p| p.first < 20).count() as f64;
            st.add("first<20", "p_second_ge_20", p, Some((p * (1.0 - p) / k).sqrt()), "1");
        }
        let low: Vec<f64> = pairs.iter().filter(|p| p.first < 20).map(|p| p.second as f64).collect();
        let high: Vec<f64> = pairs.iter().filter(|p| p.first >= 20).map(|p| p.second as f64).collect();
        if let Ok(ks) = ks_two_sample(&low, &high) {
            st.add("second|first", "ks_p_value_low_vs_high", ks.p_value, None, "1");
        }
    } else {
        let pass = pairs.iter().filter(|p| p.first >= 100).count() as f64 / n;
        st.add("all", "p_first_ge_100", pass, Some((pass * (1.0 - pass) / n).sqrt()), "1");
        let cond: Vec<u64> = pairs.iter().filter(|p| p.first > 100).map(|p| p.second).collect();
        if cond.len() >= 2 {
            let m = cond.iter().sum::<u64>() as f64 / cond.len() as f64;
            st.add("first>100", "second_mean", m, Some((m / cond.len() as f64).sqrt()), "counts");
            if let Some(f) = fano_factor(&cond) {
                st.add("first>100", "second_fano", f, None, "1");
            }
            if let Ok(d) = dispersion_test(&cond) {
                st.add("first>100", "dispersion_p_value", d.p_value, None, "1");
            }
        }
    }
    Ok(())
}

pub fn analyze_stats(input: &RecordFile, opts: &AnalyzeOptions) -> Result<RecordFile> {
    let config = source(input)?;
    let t = &input.table;
    let mut st = Stats::new();
    match &config.experiment {
        ExperimentConfig::Ple(_) => {
            let scan = tables::ple_from_table(t)?;
            let (factor, min_peak) = flat_rule(&config);
            let fits = ple_fits(&scan, opts.window);
            let centers = ple_centers(&scan, &fits, factor, min_peak);
            if let Ok((sd, e)) = center_statistics(&centers) {
                st.add("fitted", "center_std", sd, Some(e), "MHz");
                let mean = centers.iter().sum::<f64>() / centers.len() as f64;
                st.add("fitted", "center_mean", mean, Some(sd / (centers.len() as f64).sqrt()), "MHz");
            }
            st.add("fitted", "n_centers", centers.len() as f64, None, "1");
            let n = scan.rows.len() as f64;
            for (name, regime) in [
                ("on_resonance", Regime::OnResonance),
                ("off_resonance", Regime::OffResonance),
                ("dark", Regime::Dark),
            ] {
                let k = scan
                    .rows
                    .iter()
                    .filter(|r| label_scan(&scan.frequencies, &r.counts, factor, min_peak, 100.0) == regime)
                    .count() as f64;
                st.add("regime", name, k / n, Some((k / n * (1.0 - k / n) / n).sqrt()), "1");
            }
        }
        ExperimentConfig::Probe2(_) => pair_stats(&mut st, &tables::pairs_from_table(t)?, false)?,
        ExperimentConfig::PumpProbe(_) => pair_stats(&mut st, &tables::pairs_from_table(t)?, true)?,
        ExperimentConfig::Rabi(c) => {
            let records = tables::rabi_from_table(t)?;
            for trace in interval_traces(&records, &c.intervals) {
                let g = format!("[{},{})", trace.interval.lo, trace.interval.hi.map_or("inf".into(), |h| h.to_string()));
                st.add(&g, "n_sequences", trace.n_sequences as f64, None, "1");
                st.add(&g, "mean_total_counts", trace.mean.iter().sum(), None, "counts");
            }
        }
        ExperimentConfig::Ramsey(_) => {
            let a = analyze_ramsey(&tables::ramsey_from_table(t)?)?;
            st.add("envelope", "t2_star", a.t2_star(), Some(a.t2_star_err()), "ns");
            st.add("envelope", "amplitude", a.envelope.params[0], Some(a.envelope.stderr[0]), "1");
            st.add("reference", "mixed_signal", a.mixed_signal, None, "counts");
        }
        ExperimentConfig::G2(c) => {
            let n: u64 = input.meta("n_photons").and_then(|v| v.parse().ok()).unwrap_or(0);
            let h = tables::g2_from_table(t, n)?;
            st.add("raw", "first_bin", h.normalized[0], None, "1");
            st.add("raw", "n_photons", n as f64, None, "1");
            let fit = fit_histogram(&h, c, &config.emitter)?;
            st.add("fit", "g2_zero", g2_zero(&fit), Some(fit.stderr[2]), "1");
        }
        ExperimentConfig::CrcSweep(_) => {
            let rows = tables::sweep_from_table(t)?;
            let mut settings: Vec<(u64, f64)> = Vec::new();
            for r in &rows {
                if !settings.iter().any(|s| s.0 == r.c_pass && s.1 == r.offset) {
                    settings.push((r.c_pass, r.offset));
                }
            }
            for (c, o) in settings {
                let g = format!("c_pass={c},offset={o}");
                let sel: Vec<_> = rows.iter().filter(|r| r.c_pass == c && r.offset == o).collect();
                let n = sel.len() as f64;
                let h = sel.iter().filter(|r| r.outcome.heralded).count() as f64 / n;
                st.add(&g, "p_herald", h, Some((h * (1.0 - h) / n).sqrt()), "1");
                let att: Vec<f64> = sel.iter().map(|r| r.outcome.attempts as f64).collect();
                st.add(&g, "mean_attempts", att.iter().sum::<f64>() / n, None, "1");
                let rep: f64 = sel.iter().map(|r| r.outcome.repumps as f64).sum::<f64>() / n;
                st.add(&g, "mean_repumps", rep, None, "1");
                let centers = heralded_centers(&rows, c, o);
                if let Ok((sd, e)) = center_statistics(&centers) {
                    let m = centers.iter().sum::<f64>() / centers.len() as f64;
                    st.add(&g, "center_mean", m, Some(sd / (centers.len() as f64).sqrt()), "MHz");
                    st.add(&g, "center_std", sd, Some(e), "MHz");
                }
            }
        }
    }
    Ok(summary(input, "stats", st.0))
}
