use super::channel::{block_rng, draw_block, ebn0_to_sigma2_with, observe, EbPolicy};
use crate::detect::Detector;
use crate::error::{Error, Result};
use crate::isi::{build_isi_matrix, whiten, IsiMatrix, TapSource, RESIDUAL_BOUND};
use crate::pulse::{check_tau, PulseConfig};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::time::Instant;

/// Monte Carlo budget per Eb/N0 point: stop once every detector has
/// `min_errors` bit errors or after `max_blocks` blocks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StopRule {
    #[serde(default = "default_min_errors")]
    pub min_errors: u64,
    #[serde(default = "default_max_blocks")]
    pub max_blocks: u64,
}

fn default_min_errors() -> u64 {
    200
}

fn default_max_blocks() -> u64 {
    50_000
}

impl Default for StopRule {
    fn default() -> Self {
        Self {
            min_errors: default_min_errors(),
            max_blocks: default_max_blocks(),
        }
    }
}

impl StopRule {
    /// Fixed number of blocks regardless of error counts.
    pub fn blocks(max_blocks: u64) -> Self {
        Self {
            min_errors: u64::MAX,
            max_blocks,
        }
    }
}

/// Everything a BER sweep needs besides the detectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub pulse: PulseConfig,
    pub tau: f64,
    pub n: usize,
    pub es: f64,
    pub eb_policy: EbPolicy,
    pub ebn0_db: Vec<f64>,
    pub seed: u64,
    pub stop: StopRule,
    /// Blocks per parallel batch; the stop rule is checked between batches.
    pub batch: usize,
    /// Worker threads; `None` uses the global rayon pool.
    pub workers: Option<usize>,
    /// Record elapsed seconds per point (makes output run-dependent).
    pub timing: bool,
}

impl SweepConfig {
    pub fn new(beta: f64, tau: f64, n: usize, ebn0_db: Vec<f64>) -> Self {
        Self {
            pulse: PulseConfig::new(beta),
            tau,
            n,
            es: 1.0,
            eb_policy: EbPolicy::default(),
            ebn0_db,
            seed: 0,
            stop: StopRule::default(),
            batch: 64,
            workers: None,
            timing: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.pulse.validate()?;
        check_tau(self.tau)?;
        if self.n < 1 {
            return Err(Error::EmptyBlock);
        }
        if !(self.es > 0.0) {
            return Err(Error::Invalid(format!("symbol energy must be positive, got {}", self.es)));
        }
        if self.batch < 1 {
            return Err(Error::Invalid("batch must be at least 1".into()));
        }
        if self.ebn0_db.iter().any(|x| !x.is_finite()) {
            return Err(Error::Invalid("Eb/N0 grid must be finite".into()));
        }
        Ok(())
    }

    /// Whitened convolution-domain channel matrix with amplitude `sqrt(tau Es)`.
    pub fn channel(&self) -> Result<IsiMatrix> {
        let w = whiten(&self.pulse, self.tau, RESIDUAL_BOUND)?;
        build_isi_matrix(TapSource::Convolution(&w.factor), self.n, self.tau, self.es)
    }

    pub fn sigma2(&self, ebn0_db: f64) -> f64 {
        ebn0_to_sigma2_with(self.eb_policy, ebn0_db, self.tau, self.es)
    }
}

/// Accumulated error statistics of one detector at one Eb/N0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BerPoint {
    pub detector: String,
    pub beta: f64,
    pub tau: f64,
    pub n: usize,
    pub ebn0_db: f64,
    pub blocks: u64,
    pub block_errors: u64,
    pub failed_blocks: u64,
    pub bits: u64,
    pub bit_errors: u64,
    pub ber: f64,
    pub ci95: f64,
    pub update_count_mean: f64,
    pub wall_time: f64,
}

impl BerPoint {
    pub fn block_error_rate(&self) -> f64 {
        if self.blocks == 0 {
            0.0
        } else {
            self.block_errors as f64 / self.blocks as f64
        }
    }

    /// Binomial standard error of the BER estimate.
    pub fn std_error(&self) -> f64 {
        binomial_std_error(self.ber, self.bits)
    }
}

pub fn binomial_std_error(p: f64, trials: u64) -> f64 {
    if trials == 0 {
        return 0.0;
    }
    (p * (1.0 - p) / trials as f64).sqrt()
}

#[derive(Debug, Clone, Copy, Default)]
struct Tally {
    blocks: u64,
    block_errors: u64,
    failed: u64,
    bits: u64,
    bit_errors: u64,
    updates: u64,
}

impl Tally {
    fn merge(mut self, o: Tally) -> Tally {
        self.blocks += o.blocks;
        self.block_errors += o.block_errors;
        self.failed += o.failed;
        self.bits += o.bits;
        self.bit_errors += o.bit_errors;
        self.updates += o.updates;
        self
    }
}

fn run_block(
    g: &IsiMatrix,
    sigma2: f64,
    seed: u64,
    index: u64,
    detectors: &[Detector],
) -> Vec<Tally> {
    let (a, z) = draw_block(g.n(), &mut block_rng(seed, index));
    let y = observe(g, &a, &z, sigma2);
    detectors
        .iter()
        .map(|d| match d.detect(&y, g, sigma2) {
            Ok(dec) => {
                let errors = dec.hard.iter().zip(&a).filter(|(x, y)| x != y).count() as u64;
                Tally {
                    blocks: 1,
                    block_errors: (errors > 0) as u64,
                    failed: 0,
                    bits: a.len() as u64,
                    bit_errors: errors,
                    updates: dec.update_count as u64,
                }
            }
            Err(e) => {
                log::warn!("block {index}: {} failed: {e}", d.name());
                Tally {
                    failed: 1,
                    ..Tally::default()
                }
            }
        })
        .collect()
}

fn sweep_point(
    config: &SweepConfig,
    g: &IsiMatrix,
    ebn0_db: f64,
    detectors: &[Detector],
) -> Vec<BerPoint> {
    let start = Instant::now();
    let sigma2 = config.sigma2(ebn0_db);
    let mut totals = vec![Tally::default(); detectors.len()];
    let mut next = 0u64;
    let done = |t: &[Tally], next: u64| {
        next >= config.stop.max_blocks || t.iter().all(|x| x.bit_errors >= config.stop.min_errors)
    };
    while !done(&totals, next) {
        let end = (next + config.batch as u64).min(config.stop.max_blocks);
        let batch: Vec<Vec<Tally>> = (next..end)
            .into_par_iter()
            .map(|i| run_block(g, sigma2, config.seed, i, detectors))
            .collect();
        for row in batch {
            for (t, r) in totals.iter_mut().zip(row) {
                *t = t.merge(r);
            }
        }
        next = end;
    }
    let wall_time = if config.timing {
        start.elapsed().as_secs_f64()
    } else {
        0.0
    };
    detectors
        .iter()
        .zip(totals)
        .map(|(d, t)| {
            let ber = if t.bits == 0 {
                0.0
            } else {
                t.bit_errors as f64 / t.bits as f64
            };
            BerPoint {
                detector: d.name().to_string(),
                beta: config.pulse.beta,
                tau: config.tau,
                n: config.n,
                ebn0_db,
                blocks: t.blocks,
                block_errors: t.block_errors,
                failed_blocks: t.failed,
                bits: t.bits,
                bit_errors: t.bit_errors,
                ber,
                ci95: 1.96 * binomial_std_error(ber, t.bits),
                update_count_mean: if t.blocks == 0 {
                    0.0
                } else {
                    t.updates as f64 / t.blocks as f64
                },
                wall_time,
            }
        })
        .collect()
}

/// Runs all `detectors` on the same blocks at every Eb/N0 point.
///
/// Block `i` draws its symbols and noise from stream `i` of the seed, at
/// every Eb/N0 point, so detector and SNR comparisons are paired. Results
/// are ordered by Eb/N0, then by detector, and do not depend on the number
/// of workers.
pub fn ber_sweep(config: &SweepConfig, detectors: &[Detector]) -> Result<Vec<BerPoint>> {
    config.validate()?;
    for d in detectors {
        d.validate()?;
    }
    let g = config.channel()?;
    ber_sweep_with_channel(config, &g, detectors)
}

/// [`ber_sweep`] over an explicitly supplied channel matrix.
pub fn ber_sweep_with_channel(
    config: &SweepConfig,
    g: &IsiMatrix,
    detectors: &[Detector],
) -> Result<Vec<BerPoint>> {
    if g.n() != config.n {
        return Err(Error::DimensionMismatch {
            expected: config.n,
            got: g.n(),
        });
    }
    let run = || {
        config
            .ebn0_db
            .iter()
            .flat_map(|&x| sweep_point(config, g, x, detectors))
            .collect()
    };
    match config.workers {
        Some(w) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(w.max(1))
                .build()
                .map_err(|e| Error::Invalid(format!("thread pool: {e}")))?;
            Ok(pool.install(run))
        }
        None => Ok(run()),
    }
}

/// LLRs of the first `blocks` blocks of a soft detector at one Eb/N0.
pub fn export_llrs(
    config: &SweepConfig,
    detector: &Detector,
    ebn0_db: f64,
    blocks: u64,
) -> Result<Vec<Vec<f64>>> {
    config.validate()?;
    let g = config.channel()?;
    let sigma2 = config.sigma2(ebn0_db);
    (0..blocks)
        .map(|i| {
            let (a, z) = draw_block(g.n(), &mut block_rng(config.seed, i));
            let y = observe(&g, &a, &z, sigma2);
            let dec = detector.detect(&y, &g, sigma2)?;
            dec.llr
                .ok_or_else(|| Error::Invalid(format!("{} has no soft output", detector.name())))
        })
        .collect()
}

pub const BER_CSV_HEADER: &str =
    "detector,beta,tau,N,ebn0_db,bits,bit_errors,ber,ci95,update_count_mean,wall_time";

pub fn write_ber_csv<W: Write>(mut w: W, points: &[BerPoint]) -> std::io::Result<()> {
    writeln!(w, "{BER_CSV_HEADER}")?;
    for p in points {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{:e},{:e},{},{}",
            p.detector,
            p.beta,
            p.tau,
            p.n,
            p.ebn0_db,
            p.bits,
            p.bit_errors,
            p.ber,
            p.ci95,
            p.update_count_mean,
            p.wall_time
        )?;
    }
    Ok(())
}
