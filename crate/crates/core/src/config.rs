//! Experiment configuration read from TOML.
//!
//! ```toml
//! command = "ber"            # margins | ber | factorize | validate
//!
//! [model]
//! beta = 0.3
//! tau = [0.8]
//! n = 128
//!
//! [channel]
//! ebn0_db = [0, 2, 4, 6, 8]
//! seed = 1
//!
//! [[detectors]]
//! name = "pda"
//! sweeps = 8
//!
//! [output]
//! directory = "out"
//! ```

use crate::detect::Detector;
use crate::error::Error;
use crate::pulse::{PulseConfig, DEFAULT_MAX_HALF_SPAN, DEFAULT_TAP_THRESHOLD};
use crate::separability::DEFAULT_BLOCK_LEN;
use crate::sim::{EbPolicy, StopRule, SweepConfig};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    Margins,
    Ber,
    Factorize,
    Validate,
}

impl Command {
    pub fn as_str(&self) -> &'static str {
        match self {
            Command::Margins => "margins",
            Command::Ber => "ber",
            Command::Factorize => "factorize",
            Command::Validate => "validate",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    #[serde(default = "default_beta")]
    pub beta: f64,
    #[serde(default = "default_taus")]
    pub tau: Vec<f64>,
    /// Block length for BER sweeps.
    #[serde(default = "default_n")]
    pub n: usize,
    #[serde(default = "default_threshold")]
    pub tap_threshold: f64,
    #[serde(default = "default_half_span")]
    pub max_half_span: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelSection {
    #[serde(default = "default_ebn0")]
    pub ebn0_db: Vec<f64>,
    #[serde(default)]
    pub eb_policy: EbPolicy,
    #[serde(default = "default_es")]
    pub es: f64,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub stop: StopRule,
    #[serde(default = "default_batch")]
    pub batch: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarginSection {
    #[serde(default = "default_snr")]
    pub snr_db: Vec<f64>,
    #[serde(default = "default_margin_n")]
    pub n: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Text,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default = "default_dir")]
    pub directory: PathBuf,
    #[serde(default = "default_formats")]
    pub formats: Vec<Format>,
    /// Blocks of LLRs exported per `tau` by the first soft detector.
    #[serde(default)]
    pub llr_blocks: u64,
    /// Eb/N0 of the LLR export; defaults to the first grid point.
    #[serde(default)]
    pub llr_ebn0_db: Option<f64>,
    /// Record per-point wall time in the BER CSV.
    #[serde(default)]
    pub timing: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub command: Command,
    /// Worker threads for BER sweeps; all cores when absent.
    #[serde(default)]
    pub workers: Option<usize>,
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default)]
    pub channel: ChannelSection,
    #[serde(default)]
    pub margins: MarginSection,
    #[serde(default = "default_detectors")]
    pub detectors: Vec<Detector>,
    #[serde(default)]
    pub output: OutputSection,
}

fn default_beta() -> f64 {
    0.3
}
fn default_taus() -> Vec<f64> {
    vec![0.6, 0.7, 0.8, 0.9]
}
fn default_n() -> usize {
    128
}
fn default_threshold() -> f64 {
    DEFAULT_TAP_THRESHOLD
}
fn default_half_span() -> usize {
    DEFAULT_MAX_HALF_SPAN
}
fn default_ebn0() -> Vec<f64> {
    vec![0.0, 2.0, 4.0, 6.0, 8.0]
}
fn default_es() -> f64 {
    1.0
}
fn default_seed() -> u64 {
    1
}
fn default_batch() -> usize {
    64
}
fn default_snr() -> Vec<f64> {
    vec![0.0, 2.0, 4.0, 6.0, 8.0]
}
fn default_margin_n() -> usize {
    DEFAULT_BLOCK_LEN
}
fn default_dir() -> PathBuf {
    PathBuf::from("out")
}
fn default_formats() -> Vec<Format> {
    vec![Format::Csv, Format::Text, Format::Json]
}
fn default_detectors() -> Vec<Detector> {
    vec![Detector::pda()]
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            beta: default_beta(),
            tau: default_taus(),
            n: default_n(),
            tap_threshold: default_threshold(),
            max_half_span: default_half_span(),
        }
    }
}

impl Default for ChannelSection {
    fn default() -> Self {
        Self {
            ebn0_db: default_ebn0(),
            eb_policy: EbPolicy::default(),
            es: default_es(),
            seed: default_seed(),
            stop: StopRule::default(),
            batch: default_batch(),
        }
    }
}

impl Default for MarginSection {
    fn default() -> Self {
        Self {
            snr_db: default_snr(),
            n: default_margin_n(),
        }
    }
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            directory: default_dir(),
            formats: default_formats(),
            llr_blocks: 0,
            llr_ebn0_db: None,
            timing: false,
        }
    }
}

/// Configuration problem with a stable machine-readable code.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub code: &'static str,
    pub message: String,
}

impl ConfigError {
    fn new(code: &'static str, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "error code={} message={:?}", self.code, self.message)
    }
}

impl std::error::Error for ConfigError {}

impl From<Error> for ConfigError {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::InvalidTau(_) => "invalid_tau",
            Error::InvalidBeta(_) => "invalid_beta",
            Error::InvalidEpsilon(_) => "invalid_epsilon",
            Error::InvalidSweepCount => "invalid_sweeps",
            Error::EmptyBlock => "invalid_block_length",
            _ => "invalid_config",
        };
        ConfigError::new(code, e.to_string())
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: RunConfig =
            toml::from_str(text).map_err(|e| ConfigError::new("parse", e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a TOML config, or the `config` field of a JSON run manifest.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::new("io", format!("{}: {e}", path.display())))?;
        if path.extension().is_some_and(|x| x == "json") {
            #[derive(Deserialize)]
            struct Wrapped {
                config: RunConfig,
            }
            let w: Wrapped = serde_json::from_str(&text)
                .map_err(|e| ConfigError::new("parse", e.to_string()))?;
            w.config.validate()?;
            Ok(w.config)
        } else {
            Self::from_toml(&text)
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run config serializes")
    }

    pub fn pulse(&self) -> PulseConfig {
        PulseConfig::new(self.model.beta)
            .with_truncation(self.model.tap_threshold, self.model.max_half_span)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.pulse().validate()?;
        if self.model.tau.is_empty() {
            return Err(ConfigError::new("invalid_tau", "tau list is empty"));
        }
        for &tau in &self.model.tau {
            crate::pulse::check_tau(tau)?;
        }
        if self.model.n < 1 || self.margins.n < 1 {
            return Err(Error::EmptyBlock.into());
        }
        for d in &self.detectors {
            d.validate()?;
        }
        if self.command == Command::Ber && self.detectors.is_empty() {
            return Err(ConfigError::new("invalid_detector", "no detectors configured"));
        }
        if self.detectors.contains(&Detector::Mlse) && self.model.n > crate::detect::MLSE_DEFAULT_CAP {
            return Err(ConfigError::new(
                "invalid_detector",
                format!(
                    "mlse needs n <= {}, got {}",
                    crate::detect::MLSE_DEFAULT_CAP,
                    self.model.n
                ),
            ));
        }
        if !(self.channel.es > 0.0) {
            return Err(ConfigError::new("invalid_channel", "es must be positive"));
        }
        if self.channel.batch < 1 {
            return Err(ConfigError::new("invalid_channel", "batch must be at least 1"));
        }
        if self.workers == Some(0) {
            return Err(ConfigError::new("invalid_workers", "workers must be at least 1"));
        }
        Ok(())
    }

    /// Sweep settings for one `tau` of the grid.
    pub fn sweep(&self, tau: f64) -> SweepConfig {
        SweepConfig {
            pulse: self.pulse(),
            tau,
            n: self.model.n,
            es: self.channel.es,
            eb_policy: self.channel.eb_policy,
            ebn0_db: self.channel.ebn0_db.clone(),
            seed: self.channel.seed,
            stop: self.channel.stop,
            batch: self.channel.batch,
            workers: self.workers,
            timing: self.output.timing,
        }
    }

    pub fn wants(&self, format: Format) -> bool {
        self.output.formats.contains(&format)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_uses_defaults() {
        let cfg = RunConfig::from_toml("command = \"margins\"").unwrap();
        assert_eq!(cfg.model.beta, 0.3);
        assert_eq!(cfg.margins.n, 100);
        assert_eq!(cfg.channel.stop.max_blocks, 50_000);
        assert_eq!(cfg.detectors, vec![Detector::pda()]);
    }

    #[test]
    fn parses_detector_list() {
        let cfg = RunConfig::from_toml(
            r#"
            command = "ber"
            [[detectors]]
            name = "modified_pda"
            epsilon = 0.4
            [[detectors]]
            name = "successive"
            "#,
        )
        .unwrap();
        assert_eq!(cfg.detectors, vec![Detector::modified_pda(0.4), Detector::Successive]);
    }

    #[test]
    fn distinct_codes_for_invalid_parameters() {
        let code = |s: &str| RunConfig::from_toml(s).unwrap_err().code;
        assert_eq!(
            code("command = \"ber\"\n[[detectors]]\nname = \"modified_pda\"\nepsilon = 0.5"),
            "invalid_epsilon"
        );
        assert_eq!(code("command = \"ber\"\n[model]\ntau = [1.2]"), "invalid_tau");
        assert_eq!(code("command = \"ber\"\n[model]\ntau = [0.0]"), "invalid_tau");
        assert_eq!(
            code("command = \"ber\"\n[[detectors]]\nname = \"pda\"\nsweeps = 0"),
            "invalid_sweeps"
        );
    }

    #[test]
    fn rejects_unknown_keys() {
        assert_eq!(
            RunConfig::from_toml("command = \"ber\"\n[model]\nbta = 0.3").unwrap_err().code,
            "parse"
        );
        assert_eq!(RunConfig::from_toml("command = \"ber\"\nextra = 1").unwrap_err().code, "parse");
        assert_eq!(
            RunConfig::from_toml("command = \"ber\"\n[[detectors]]\nname = \"pda\"\nepsilon = 0.1")
                .unwrap_err()
                .code,
            "parse"
        );
    }

    #[test]
    fn toml_round_trip() {
        let cfg = RunConfig::from_toml("command = \"factorize\"\n[model]\ntau = [0.8, 0.9]").unwrap();
        assert_eq!(RunConfig::from_toml(&cfg.to_toml()).unwrap(), cfg);
    }
}
