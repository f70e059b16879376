//! Run configuration in TOML.
//!
//! ```toml
//! seed = 7
//!
//! [emitter]
//! inhomogeneous_sigma = "47 MHz"
//!
//! [crc]
//! c_pass = 110
//!
//! [experiment]
//! kind = "ple"
//! n_scans = 200
//! ```

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::crc::CrcConfig;
use crate::error::{Error, Result};
use crate::experiments::{
    CrcSweepConfig, DoubleProbeConfig, G2Config, PleScanConfig, PumpProbeConfig, RabiConfig, RamseyConfig,
};
use crate::physics::params::EmitterParams;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ExperimentConfig {
    Ple(PleScanConfig),
    Probe2(DoubleProbeConfig),
    PumpProbe(PumpProbeConfig),
    Rabi(RabiConfig),
    Ramsey(RamseyConfig),
    G2(G2Config),
    CrcSweep(CrcSweepConfig),
}

impl ExperimentConfig {
    /// Subcommand / record kind name.
    pub fn kind(&self) -> &'static str {
        match self {
            Self::Ple(_) => "ple",
            Self::Probe2(_) => "probe2",
            Self::PumpProbe(_) => "pump-probe",
            Self::Rabi(_) => "rabi",
            Self::Ramsey(_) => "ramsey",
            Self::G2(_) => "g2",
            Self::CrcSweep(_) => "crc-sweep",
        }
    }

    pub fn default_for(kind: &str) -> Result<Self> {
        Ok(match kind {
            "ple" => Self::Ple(Default::default()),
            "probe2" => Self::Probe2(Default::default()),
            "pump-probe" => Self::PumpProbe(Default::default()),
            "rabi" => Self::Rabi(Default::default()),
            "ramsey" => Self::Ramsey(Default::default()),
            "g2" => Self::G2(Default::default()),
            "crc-sweep" => Self::CrcSweep(Default::default()),
            other => return Err(Error::config("experiment.kind", format!("unknown experiment `{other}`"))),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_workers")]
    pub n_workers: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_path: Option<PathBuf>,
    #[serde(default)]
    pub emitter: EmitterParams,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub crc: Option<CrcConfig>,
    pub experiment: ExperimentConfig,
}

fn default_workers() -> usize {
    1
}

impl RunConfig {
    pub fn new(experiment: ExperimentConfig) -> Self {
        Self {
            seed: 0,
            n_workers: 1,
            output_path: None,
            emitter: EmitterParams::default(),
            crc: None,
            experiment,
        }
    }

    /// The check configuration, defaulted when the section is absent.
    pub fn crc_or_default(&self) -> CrcConfig {
        self.crc.clone().unwrap_or_default()
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_workers == 0 {
            return Err(Error::config("n_workers", "must be >= 1"));
        }
        self.emitter.validate()?;
        let crc = self.crc_or_default();
        if self.crc.is_some() {
            crc.validate()?;
        }
        match &self.experiment {
            ExperimentConfig::Ple(c) => c.validate(),
            ExperimentConfig::Probe2(c) => c.validate(),
            ExperimentConfig::PumpProbe(c) => c.validate(),
            ExperimentConfig::Rabi(c) => c.validate(),
            ExperimentConfig::Ramsey(c) => c.validate(),
            ExperimentConfig::G2(c) => c.validate(),
            ExperimentConfig::CrcSweep(c) => c.validate(&crc),
        }
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::ConfigParse(format!("cannot serialize config: {e}")))
    }

    /// Serialization with execution-only settings (worker count, output
    /// path) reset, so that it identifies the simulated data alone.
    pub fn canonical_toml(&self) -> Result<String> {
        Self {
            n_workers: 1,
            output_path: None,
            ..self.clone()
        }
        .to_toml()
    }

    pub fn sha256(&self) -> Result<String> {
        Ok(sha256_hex(&self.canonical_toml()?))
    }
}

pub fn sha256_hex(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

/// Parse and validate a run configuration.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let config: RunConfig = toml::from_str(text).map_err(|e| Error::ConfigParse(e.to_string().trim().to_string()))?;
    config.validate()?;
    Ok(config)
}
