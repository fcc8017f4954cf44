//! Command execution: turns a [`RunConfig`] into artifacts on disk and an
//! exit status.

use crate::config::{Command, ConfigError, Format, RunConfig};
use crate::detect::write_llr_csv;
use crate::error::Error;
use crate::isi::{whiten, write_taps_csv, RESIDUAL_BOUND};
use crate::separability::margin_report_grid;
use crate::sim::{ber_sweep, export_llrs, write_ber_csv, BerPoint};
use crate::validate;
use serde::Serialize;
use std::fmt;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

/// Process exit status of a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitStatus {
    Success = 0,
    ConfigError = 1,
    NumericalFailure = 2,
    AcceptanceFailure = 3,
}

impl ExitStatus {
    pub fn code(self) -> i32 {
        self as i32
    }
}

/// Why a run stopped early.
#[derive(Debug)]
pub enum RunError {
    Config(ConfigError),
    Numerical(Error),
    Io(std::io::Error),
}

impl RunError {
    pub fn status(&self) -> ExitStatus {
        match self {
            RunError::Config(_) => ExitStatus::ConfigError,
            RunError::Numerical(_) | RunError::Io(_) => ExitStatus::NumericalFailure,
        }
    }
}

impl fmt::Display for RunError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RunError::Config(e) => write!(f, "{e}"),
            RunError::Numerical(e) => write!(f, "error code=numerical message={:?}", e.to_string()),
            RunError::Io(e) => write!(f, "error code=io message={:?}", e.to_string()),
        }
    }
}

impl std::error::Error for RunError {}

impl From<std::io::Error> for RunError {
    fn from(e: std::io::Error) -> Self {
        RunError::Io(e)
    }
}

impl From<ConfigError> for RunError {
    fn from(e: ConfigError) -> Self {
        RunError::Config(e)
    }
}

impl From<Error> for RunError {
    fn from(e: Error) -> Self {
        match e {
            Error::NegativeSpectrum { .. }
            | Error::FactorizationResidual { .. }
            | Error::NotPositiveDefinite => RunError::Numerical(e),
            Error::InvalidTau(_)
            | Error::InvalidBeta(_)
            | Error::InvalidEpsilon(_)
            | Error::InvalidSweepCount
            | Error::EmptyBlock
            | Error::InvalidNoiseVariance(_)
            | Error::BlockTooLong { .. } => RunError::Config(e.into()),
            _ => RunError::Numerical(e),
        }
    }
}

/// Run record written next to the artifacts. `status` is `running` until
/// the command finishes, so an interrupted run is never mistaken for a
/// complete one.
#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub crate_version: &'static str,
    pub command: &'static str,
    pub status: &'static str,
    pub exit_code: i32,
    pub error: Option<String>,
    pub artifacts: Vec<String>,
    pub config: RunConfig,
}

struct Artifacts {
    dir: PathBuf,
    names: Vec<String>,
}

impl Artifacts {
    fn create(&mut self, name: &str) -> std::io::Result<BufWriter<File>> {
        self.names.push(name.to_string());
        Ok(BufWriter::new(File::create(self.dir.join(name))?))
    }
}

fn write_manifest(dir: &Path, manifest: &Manifest) -> std::io::Result<()> {
    let text = serde_json::to_string_pretty(manifest).expect("manifest serializes");
    fs::write(dir.join("manifest.json"), text + "\n")
}

fn tau_tag(tau: f64) -> String {
    format!("{tau}").replace('.', "p")
}

fn run_margins(cfg: &RunConfig, out: &mut Artifacts) -> Result<ExitStatus, RunError> {
    let table = margin_report_grid(cfg.pulse(), &cfg.model.tau, &cfg.margins.snr_db, cfg.margins.n)?;
    let text = table.to_text();
    print!("{text}");
    if cfg.wants(Format::Text) {
        out.create("margins.txt")?.write_all(text.as_bytes())?;
    }
    if cfg.wants(Format::Csv) {
        table.write_csv(out.create("margins.csv")?)?;
    }
    if cfg.wants(Format::Json) {
        serde_json::to_writer_pretty(out.create("margins.json")?, &table)
            .map_err(std::io::Error::from)?;
    }
    Ok(ExitStatus::Success)
}

fn run_ber(cfg: &RunConfig, out: &mut Artifacts) -> Result<ExitStatus, RunError> {
    let mut points: Vec<BerPoint> = Vec::new();
    for &tau in &cfg.model.tau {
        let sweep = cfg.sweep(tau);
        let pts = ber_sweep(&sweep, &cfg.detectors)?;
        for p in &pts {
            log::info!(
                "{} tau={} {} dB: ber {:.3e} over {} bits",
                p.detector,
                p.tau,
                p.ebn0_db,
                p.ber,
                p.bits
            );
        }
        points.extend(pts);
        if cfg.output.llr_blocks > 0 {
            let soft = cfg
                .detectors
                .iter()
                .find(|d| matches!(d, crate::detect::Detector::Pda { .. } | crate::detect::Detector::ModifiedPda { .. }));
            if let Some(det) = soft {
                let ebn0 = cfg
                    .output
                    .llr_ebn0_db
                    .or(cfg.channel.ebn0_db.first().copied())
                    .unwrap_or(0.0);
                let llr = export_llrs(&sweep, det, ebn0, cfg.output.llr_blocks)?;
                write_llr_csv(out.create(&format!("llr_tau{}.csv", tau_tag(tau)))?, &llr)?;
            }
        }
    }
    if cfg.wants(Format::Csv) {
        write_ber_csv(out.create("ber.csv")?, &points)?;
    }
    if cfg.wants(Format::Json) {
        serde_json::to_writer_pretty(out.create("ber.json")?, &points)
            .map_err(std::io::Error::from)?;
    }
    let mut stdout = std::io::stdout().lock();
    write_ber_csv(&mut stdout, &points)?;
    Ok(ExitStatus::Success)
}

fn run_factorize(cfg: &RunConfig, out: &mut Artifacts) -> Result<ExitStatus, RunError> {
    let mut summary = out.create("factorization.csv")?;
    writeln!(
        summary,
        "beta,tau,L,method,residual,loading,max_root_modulus,minimum_phase"
    )?;
    for &tau in &cfg.model.tau {
        let w = whiten(&cfg.pulse(), tau, RESIDUAL_BOUND)?;
        let f = &w.factor;
        let line = format!(
            "{},{},{},{:?},{:e},{:e},{},{}",
            cfg.model.beta,
            tau,
            f.len(),
            f.method,
            f.residual,
            f.loading,
            f.max_root_modulus.map_or(String::new(), |m| format!("{m}")),
            f.is_minimum_phase()
        );
        println!("{line}");
        writeln!(summary, "{line}")?;
        write_taps_csv(out.create(&format!("taps_tau{}.csv", tau_tag(tau)))?, &w.taps, f)?;
    }
    summary.flush()?;
    Ok(ExitStatus::Success)
}

fn run_validate(cfg: &RunConfig, out: &mut Artifacts) -> Result<ExitStatus, RunError> {
    let opts = validate::Options {
        seed: cfg.channel.seed,
        workers: cfg.workers,
    };
    let outcomes = validate::run_all(&opts)?;
    let mut report = out.create("validation.txt")?;
    for o in &outcomes {
        println!("{o}");
        writeln!(report, "{o}")?;
    }
    report.flush()?;
    if outcomes.iter().all(|o| o.passed) {
        Ok(ExitStatus::Success)
    } else {
        Ok(ExitStatus::AcceptanceFailure)
    }
}

/// Executes the configured command, writing artifacts and `manifest.json`
/// into `cfg.output.directory`.
pub fn run(cfg: &RunConfig) -> Result<ExitStatus, RunError> {
    cfg.validate()?;
    let dir = cfg.output.directory.clone();
    fs::create_dir_all(&dir)?;
    let mut manifest = Manifest {
        crate_version: env!("CARGO_PKG_VERSION"),
        command: cfg.command.as_str(),
        status: "running",
        exit_code: -1,
        error: None,
        artifacts: Vec::new(),
        config: cfg.clone(),
    };
    write_manifest(&dir, &manifest)?;
    fs::write(dir.join("config.toml"), cfg.to_toml())?;
    let mut out = Artifacts {
        dir: dir.clone(),
        names: vec!["config.toml".into()],
    };
    let result = match cfg.command {
        Command::Margins => run_margins(cfg, &mut out),
        Command::Ber => run_ber(cfg, &mut out),
        Command::Factorize => run_factorize(cfg, &mut out),
        Command::Validate => run_validate(cfg, &mut out),
    };
    manifest.artifacts = out.names;
    match &result {
        Ok(status) => {
            manifest.status = "complete";
            manifest.exit_code = status.code();
        }
        Err(e) => {
            manifest.status = "failed";
            manifest.exit_code = e.status().code();
            manifest.error = Some(e.to_string());
        }
    }
    write_manifest(&dir, &manifest)?;
    result
}
