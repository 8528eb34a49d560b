//! Experiment configuration: one TOML file of flat dotted keys.
//!
//! ```toml
//! experiment = "rate-sweep"
//! system.m = 5
//! system.r = 5
//! system.order = 4
//! snr.grid_db = [2.0, 6.0, 10.0]
//! detectors = ["exact", "mmse", "ec-sl"]
//! run.samples = 5000
//! run.channels = 20
//! run.seed = 1
//! ```
//!
//! Unknown keys are errors. Output files embed the resolved configuration
//! as `# config:` lines, and such a file is accepted wherever a
//! configuration is expected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::detector::DetectorSpec;
use crate::error::{config_err, CliError, Result};

const CONFIG_PREFIX: &str = "# config: ";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    RateSweep,
    ConvergenceTrace,
    CodedBer,
    FreeEnergyTrace,
}

impl ExperimentKind {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::RateSweep => "rate-sweep",
            Self::ConvergenceTrace => "convergence-trace",
            Self::CodedBer => "coded-ber",
            Self::FreeEnergyTrace => "free-energy-trace",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SystemConfig {
    /// Transmit antennas.
    pub m: usize,
    /// Receive antennas.
    pub r: usize,
    /// QAM order.
    pub order: usize,
    /// Symbol energy.
    pub es: f64,
    /// Put the quadrature bits first in each Gray label.
    pub imag_bits_first: bool,
}

impl Default for SystemConfig {
    fn default() -> Self {
        Self { m: 5, r: 5, order: 4, es: 1.0, imag_bits_first: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SnrConfig {
    /// Channel SNR points in dB.
    pub grid_db: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    /// Monte Carlo samples per channel realization (rate sweep).
    pub samples: usize,
    /// Channel realizations per SNR point (rate sweep).
    pub channels: usize,
    /// Channel/observation instances per SNR point (traces).
    pub instances: usize,
    /// Codewords per SNR point (coded BER).
    pub words: usize,
    pub decoder_iters: usize,
    /// Draw a new channel matrix for every codeword.
    pub redraw_channel: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self { seed: 1, samples: 5000, channels: 20, instances: 2000, words: 2000, decoder_iters: 100, redraw_channel: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CodeConfig {
    pub n: usize,
    pub col_weight: usize,
    pub row_weight: usize,
    pub seed: u64,
}

impl Default for CodeConfig {
    fn default() -> Self {
        Self { n: 1024, col_weight: 3, row_weight: 6, seed: 1 }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    #[serde(default)]
    pub system: SystemConfig,
    pub snr: SnrConfig,
    pub detectors: Vec<DetectorSpec>,
    #[serde(default)]
    pub run: RunConfig,
    #[serde(default)]
    pub code: CodeConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

impl ExperimentConfig {
    /// Parses TOML text, or the embedded configuration of an output file.
    pub fn parse(text: &str) -> Result<Self> {
        let embedded: Vec<&str> = text.lines().filter_map(|l| l.strip_prefix(CONFIG_PREFIX)).collect();
        let cfg: Self = if embedded.is_empty() { toml::from_str(text)? } else { toml::from_str(&embedded.join("\n"))? };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Io { path: path.display().to_string(), source })?;
        Self::parse(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let s = &self.system;
        if s.m == 0 || s.r == 0 {
            return Err(config_err("system.m/system.r", "antenna counts must be at least 1"));
        }
        if !(s.es > 0.0) {
            return Err(config_err("system.es", "must be positive"));
        }
        ecmimo::Constellation64::new(s.order, s.es).map_err(|e| config_err("system.order", e.to_string()))?;
        if self.snr.grid_db.is_empty() {
            return Err(config_err("snr.grid_db", "needs at least one point"));
        }
        if let Some(x) = self.snr.grid_db.iter().find(|x| !x.is_finite()) {
            return Err(config_err("snr.grid_db", format!("non-finite value {x}")));
        }
        if self.detectors.is_empty() {
            return Err(config_err("detectors", "needs at least one detector"));
        }
        let mut labels: Vec<&str> = self.detectors.iter().map(|d| d.label()).collect();
        labels.sort_unstable();
        if let Some(w) = labels.windows(2).find(|w| w[0] == w[1]) {
            return Err(config_err("detectors", format!("duplicate label `{}`; add name=...", w[0])));
        }
        let r = &self.run;
        let need = |field: &str, v: usize| if v == 0 { Err(config_err(field, "must be at least 1")) } else { Ok(()) };
        match self.experiment {
            ExperimentKind::RateSweep => {
                need("run.samples", r.samples)?;
                need("run.channels", r.channels)?;
            }
            ExperimentKind::ConvergenceTrace | ExperimentKind::FreeEnergyTrace => {
                need("run.instances", r.instances)?;
                if let Some((i, d)) = self.detectors.iter().enumerate().find(|(_, d)| !d.is_ec()) {
                    return Err(config_err(format!("detectors[{i}]"), format!("`{d}` is not an EC detector")));
                }
            }
            ExperimentKind::CodedBer => {
                need("run.words", r.words)?;
                need("code.n", self.code.n)?;
            }
        }
        Ok(())
    }

    /// The configuration as flat `key = value` lines, sorted by key.
    pub fn to_flat_lines(&self) -> Vec<String> {
        let value = toml::Value::try_from(self).expect("config serializes");
        let mut out = Vec::new();
        flatten("", &value, &mut out);
        out
    }

    /// Lines to embed in an output file header.
    pub fn metadata_lines(&self) -> Vec<String> {
        self.to_flat_lines().into_iter().map(|l| format!("{CONFIG_PREFIX}{l}")).collect()
    }
}

fn flatten(prefix: &str, v: &toml::Value, out: &mut Vec<String>) {
    match v {
        toml::Value::Table(t) => {
            for (k, v) in t {
                let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                flatten(&key, v, out);
            }
        }
        other => out.push(format!("{prefix} = {other}")),
    }
}
