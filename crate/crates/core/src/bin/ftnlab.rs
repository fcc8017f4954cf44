use clap::{Parser, ValueEnum};
use ftnpda::config::{Command, RunConfig};
use ftnpda::run::{run, ExitStatus};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Cmd {
    Margins,
    Ber,
    Factorize,
    Validate,
}

/// FTN signaling lab: separability margins, BER sweeps, whitening-filter
/// checks and the acceptance suite.
///
/// The config is a TOML file (or a previous run's manifest.json). Defaults:
/// beta 0.3, tau [0.6, 0.7, 0.8, 0.9], BER block length 128, margin block
/// length 100, Eb/N0 and SNR grid [0, 2, 4, 6, 8] dB, Eb = tau Es, seed 1,
/// stop after 200 bit errors or 50000 blocks, detector pda with 8 sweeps,
/// output directory "out", formats csv/text/json.
///
/// Exit codes: 0 success, 1 config error, 2 numerical failure,
/// 3 acceptance failure.
#[derive(Debug, Parser)]
#[command(name = "ftnlab", version)]
struct Args {
    /// Command to run; overrides the config's `command`.
    command: Option<Cmd>,
    /// TOML config or JSON manifest; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed override for all Monte Carlo draws.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for BER sweeps.
    #[arg(long)]
    workers: Option<usize>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let args = Args::parse();
    let loaded = match &args.config {
        Some(path) => RunConfig::load(path),
        None => match args.command {
            Some(_) => RunConfig::from_toml("command = \"validate\""),
            None => {
                eprintln!("error code=usage message=\"give a command or --config\"");
                return ExitCode::from(ExitStatus::ConfigError.code() as u8);
            }
        },
    };
    let mut cfg = match loaded {
        Ok(c) => c,
        Err(e) => {
            eprintln!("{e}");
            return ExitCode::from(ExitStatus::ConfigError.code() as u8);
        }
    };
    if let Some(c) = args.command {
        cfg.command = match c {
            Cmd::Margins => Command::Margins,
            Cmd::Ber => Command::Ber,
            Cmd::Factorize => Command::Factorize,
            Cmd::Validate => Command::Validate,
        };
    }
    if let Some(dir) = args.out {
        cfg.output.directory = dir;
    }
    if let Some(seed) = args.seed {
        cfg.channel.seed = seed;
    }
    if args.workers.is_some() {
        cfg.workers = args.workers;
    }
    match run(&cfg) {
        Ok(status) => ExitCode::from(status.code() as u8),
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.status().code() as u8)
        }
    }
}
