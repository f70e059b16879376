//! Command-line entry point.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::error::{Error, Result};
use crate::experiments::{
    run_crc_sweep, run_double_probe, run_g2, run_ple_scan, run_probe_repump_probe, run_rabi, run_ramsey,
};

use super::analyze::{analyze_fit, analyze_stats, AnalyzeOptions};
use super::config::{parse_config, ExperimentConfig, RunConfig};
use super::record::RecordFile;
use super::report::{figure, FigureId};
use super::tables;

#[derive(Debug, Parser)]
#[command(name = "herald", version, about = "Heralded single-emitter simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one experiment harness and write its record file.
    Simulate {
        kind: SimKind,
        #[command(flatten)]
        run: RunFlags,
    },
    /// Fit or summarize a record file.
    Analyze {
        mode: AnalyzeMode,
        /// Record file produced by `simulate`.
        record: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Fit window for PLE peaks, e.g. `--window-mhz=-150,100`.
        #[arg(long, value_delimiter = ',', num_args = 2, allow_negative_numbers = true)]
        window_mhz: Option<Vec<f64>>,
    },
    /// Plot-ready data for one figure panel.
    Report {
        #[command(subcommand)]
        what: ReportWhat,
    },
}

#[derive(Debug, Subcommand)]
enum ReportWhat {
    Figure {
        id: FigureId,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        workers: usize,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SimKind {
    Ple,
    Probe2,
    PumpProbe,
    Rabi,
    Ramsey,
    G2,
    CrcSweep,
}

impl SimKind {
    fn name(self) -> &'static str {
        match self {
            Self::Ple => "ple",
            Self::Probe2 => "probe2",
            Self::PumpProbe => "pump-probe",
            Self::Rabi => "rabi",
            Self::Ramsey => "ramsey",
            Self::G2 => "g2",
            Self::CrcSweep => "crc-sweep",
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum AnalyzeMode {
    Fit,
    Stats,
}

#[derive(Debug, Args)]
struct RunFlags {
    /// Config file, or `default` for the built-in defaults.
    #[arg(long, default_value = "default")]
    config: String,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    c_pass: Option<u64>,
    #[arg(long)]
    c_repump: Option<u64>,
    #[arg(long, allow_negative_numbers = true)]
    probe_offset_mhz: Option<f64>,
}

fn load_config(kind: SimKind, flags: &RunFlags) -> Result<RunConfig> {
    let mut config = if flags.config == "default" {
        RunConfig::new(ExperimentConfig::default_for(kind.name())?)
    } else {
        let text = std::fs::read_to_string(&flags.config)
            .map_err(|e| Error::ConfigParse(format!("cannot read {}: {e}", flags.config)))?;
        parse_config(&text)?
    };
    if config.experiment.kind() != kind.name() {
        return Err(Error::config(
            "experiment.kind",
            format!("config describes `{}` but `simulate {}` was requested", config.experiment.kind(), kind.name()),
        ));
    }
    if let Some(s) = flags.seed {
        config.seed = s;
    }
    if let Some(w) = flags.workers {
        config.n_workers = w;
    }
    if flags.c_pass.is_some() || flags.c_repump.is_some() || flags.probe_offset_mhz.is_some() {
        let mut crc = config.crc_or_default();
        if let Some(v) = flags.c_pass {
            crc.c_pass = v;
        }
        if let Some(v) = flags.c_repump {
            crc.c_repump = v;
        }
        if let Some(v) = flags.probe_offset_mhz {
            crc.probe_laser_offset = v;
        }
        config.crc = Some(crc);
    }
    match &mut config.experiment {
        ExperimentConfig::CrcSweep(s) => {
            if let Some(v) = flags.c_pass {
                s.c_pass_values = vec![v];
            }
            if let Some(v) = flags.probe_offset_mhz {
                s.offsets = vec![v];
            }
        }
        ExperimentConfig::Probe2(p) => {
            if let Some(v) = flags.probe_offset_mhz {
                p.probe.laser_offset = v;
            }
        }
        ExperimentConfig::PumpProbe(p) => {
            if let Some(v) = flags.probe_offset_mhz {
                p.probe.laser_offset = v;
            }
        }
        ExperimentConfig::Rabi(r) => {
            if let Some(v) = flags.probe_offset_mhz {
                r.probe.laser_offset = v;
                r.drive_offset = v;
            }
        }
        _ => {}
    }
    config.validate()?;
    Ok(config)
}

/// Run the harness selected by `config` and package its record.
pub fn simulate(config: &RunConfig) -> Result<RecordFile> {
    config.validate()?;
    let (p, crc, seed, w) = (&config.emitter, config.crc_or_default(), config.seed, config.n_workers);
    let kind = config.experiment.kind();
    let record = match &config.experiment {
        ExperimentConfig::Ple(c) => RecordFile::new(kind, config, tables::ple_table(&run_ple_scan(c, &crc, p, seed, w)?))?,
        ExperimentConfig::Probe2(c) => {
            RecordFile::new(kind, config, tables::pairs_table(&run_double_probe(c, p, seed, w)?, "c1", "c2"))?
        }
        ExperimentConfig::PumpProbe(c) => {
            RecordFile::new(kind, config, tables::pairs_table(&run_probe_repump_probe(c, p, seed, w)?, "c3", "c4"))?
        }
        ExperimentConfig::Rabi(c) => RecordFile::new(kind, config, tables::rabi_table(&run_rabi(c, &crc, p, seed, w)?))?,
        ExperimentConfig::Ramsey(c) => {
            RecordFile::new(kind, config, tables::ramsey_table(&run_ramsey(c, &crc, p, seed, w)?))?
        }
        ExperimentConfig::G2(c) => {
            let h = run_g2(c, p, seed, w)?;
            RecordFile::new(kind, config, tables::g2_table(&h))?.with_meta("n_photons", h.n_photons)
        }
        ExperimentConfig::CrcSweep(c) => {
            RecordFile::new(kind, config, tables::sweep_table(&run_crc_sweep(c, &crc, p, seed, w)?))?
        }
    };
    Ok(record)
}

fn emit(record: &RecordFile, out: Option<&Path>) -> Result<()> {
    let text = record.to_text()?;
    match out {
        Some(path) => super::record::write_atomic(path, &text),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            Ok(stdout.flush()?)
        }
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate { kind, run } => {
            let config = load_config(kind, &run)?;
            let record = simulate(&config)?;
            let out = run.out.or_else(|| config.output_path.clone());
            emit(&record, out.as_deref())
        }
        Command::Analyze { mode, record, out, window_mhz } => {
            let input = RecordFile::read(&record)?;
            let opts = AnalyzeOptions {
                window: window_mhz.map(|w| (w[0], w[1])),
            };
            let summary = match mode {
                AnalyzeMode::Fit => analyze_fit(&input, &opts)?,
                AnalyzeMode::Stats => analyze_stats(&input, &opts)?,
            };
            emit(&summary, out.as_deref())
        }
        Command::Report {
            what: ReportWhat::Figure { id, seed, out, workers },
        } => {
            if workers == 0 {
                return Err(Error::config("workers", "must be >= 1"));
            }
            emit(&figure(id, seed, workers)?, out.as_deref())
        }
    }
}

/// Parse `argv`, run, and return the process exit code: 0 on success, 2 on
/// usage, configuration or input errors, 1 on runtime failures.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_user_error() {
                2
            } else {
                1
            }
        }
    }
}
