//! Block detectors for the BPSK ISI model: PDA and its confidence-region
//! variant, a successive interference-cancelling baseline, and exhaustive
//! MLSE.

mod pda;

pub use pda::{
    detection_order, modified_pda_detect, pda_detect, pda_posterior_update, posterior_from_llr,
    PdaState, DEFAULT_SWEEPS, LLR_CLAMP,
};

use crate::error::{Error, Result};
use crate::isi::{Domain, IsiMatrix};
use nalgebra::DVector;
use serde::{Deserialize, Serialize};
use std::io::Write;

/// Largest block accepted by [`mlse_bruteforce`] by default.
pub const MLSE_DEFAULT_CAP: usize = 16;

/// Soft and hard output of a PDA run.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectionResult {
    /// Decisions in `{-1, +1}`.
    pub hard: Vec<f64>,
    pub posteriors: Vec<f64>,
    pub llr: Vec<f64>,
    pub update_count: usize,
    pub sweeps: usize,
}

fn sign(x: f64) -> f64 {
    if x >= 0.0 {
        1.0
    } else {
        -1.0
    }
}

/// Symbol-by-symbol detection with causal interference cancellation:
/// `a_k = sgn(y_k - sum_{j<k} G_kj a_j)`.
pub fn successive_baseline(y: &[f64], g: &IsiMatrix) -> Result<Vec<f64>> {
    if g.domain() != Domain::Convolution {
        return Err(Error::WrongDomain("successive detection needs the convolution domain"));
    }
    let n = g.n();
    if y.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: y.len(),
        });
    }
    let band = g.bandwidth();
    let mut a = vec![0.0; n];
    for k in 0..n {
        let start = (k + 1).saturating_sub(band);
        let isi: f64 = (start..k).map(|j| g.get(k, j) * a[j]).sum();
        a[k] = sign(y[k] - isi);
    }
    Ok(a)
}

/// Exhaustive MLSE `argmin ||y - G a||^2` over `{-1, +1}^N` for
/// `N <= MLSE_DEFAULT_CAP`. Ties resolve to the lexicographically smallest
/// sequence with `-1 < +1`.
pub fn mlse_bruteforce(y: &[f64], g: &IsiMatrix) -> Result<Vec<f64>> {
    mlse_bruteforce_capped(y, g, MLSE_DEFAULT_CAP)
}

/// [`mlse_bruteforce`] with an explicit block-length cap (at most 30).
pub fn mlse_bruteforce_capped(y: &[f64], g: &IsiMatrix, cap: usize) -> Result<Vec<f64>> {
    let n = g.n();
    let cap = cap.min(30);
    if n > cap {
        return Err(Error::BlockTooLong { len: n, cap });
    }
    if y.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: y.len(),
        });
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteObservation);
    }
    // ||y - G a||^2 = a^T Q a - 2 b^T a + const with Q = G^T G, b = G^T y.
    let gm = g.entries();
    let q = gm.transpose() * gm;
    let b = gm.transpose() * DVector::from_column_slice(y);
    let objective = |a: &DVector<f64>| (a.transpose() * &q * a)[(0, 0)] - 2.0 * b.dot(a);

    let mut a = DVector::from_element(n, -1.0);
    let mut qa = &q * &a;
    let mut f = objective(&a);
    let mut best = a.clone();
    let mut best_f = f;
    for step in 1u64..(1u64 << n) {
        let i = step.trailing_zeros() as usize;
        let delta = -2.0 * a[i];
        f += 2.0 * delta * qa[i] + delta * delta * q[(i, i)] - 2.0 * b[i] * delta;
        a[i] = -a[i];
        qa.axpy(delta, &q.column(i), 1.0);
        let tol = 1e-9 * (1.0 + best_f.abs());
        if f < best_f - tol {
            best.copy_from(&a);
            best_f = f;
        } else if f <= best_f + tol {
            let exact = objective(&a);
            let exact_best = objective(&best);
            if exact < exact_best || (exact == exact_best && lex_less(&a, &best)) {
                best.copy_from(&a);
                best_f = exact;
            }
        }
    }
    Ok(best.iter().copied().collect())
}

fn lex_less(a: &DVector<f64>, b: &DVector<f64>) -> bool {
    for (x, y) in a.iter().zip(b.iter()) {
        if x != y {
            return x < y;
        }
    }
    false
}

/// Detector selection for simulations and the command line.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum Detector {
    Pda {
        #[serde(default = "default_sweeps")]
        sweeps: usize,
    },
    ModifiedPda {
        #[serde(default = "default_sweeps")]
        sweeps: usize,
        epsilon: f64,
    },
    Successive,
    Mlse,
}

fn default_sweeps() -> usize {
    DEFAULT_SWEEPS
}

/// Hard decisions plus whatever soft information the detector produces.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockDecision {
    pub hard: Vec<f64>,
    pub llr: Option<Vec<f64>>,
    pub update_count: usize,
}

impl Detector {
    pub fn pda() -> Self {
        Detector::Pda {
            sweeps: DEFAULT_SWEEPS,
        }
    }

    pub fn modified_pda(epsilon: f64) -> Self {
        Detector::ModifiedPda {
            sweeps: DEFAULT_SWEEPS,
            epsilon,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Detector::Pda { .. } => "pda",
            Detector::ModifiedPda { .. } => "modified_pda",
            Detector::Successive => "successive",
            Detector::Mlse => "mlse",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Detector::Pda { sweeps } if sweeps < 1 => Err(Error::InvalidSweepCount),
            Detector::ModifiedPda { sweeps, .. } if sweeps < 1 => Err(Error::InvalidSweepCount),
            Detector::ModifiedPda { epsilon, .. } if !(0.0..0.5).contains(&epsilon) => {
                Err(Error::InvalidEpsilon(epsilon))
            }
            _ => Ok(()),
        }
    }

    pub fn detect(&self, y: &[f64], g: &IsiMatrix, sigma2: f64) -> Result<BlockDecision> {
        match *self {
            Detector::Pda { sweeps } => Ok(pda_detect(y, g, sigma2, sweeps)?.into()),
            Detector::ModifiedPda { sweeps, epsilon } => {
                Ok(modified_pda_detect(y, g, sigma2, sweeps, epsilon)?.into())
            }
            Detector::Successive => Ok(BlockDecision {
                hard: successive_baseline(y, g)?,
                llr: None,
                update_count: 0,
            }),
            Detector::Mlse => Ok(BlockDecision {
                hard: mlse_bruteforce(y, g)?,
                llr: None,
                update_count: 0,
            }),
        }
    }
}

impl From<DetectionResult> for BlockDecision {
    fn from(r: DetectionResult) -> Self {
        BlockDecision {
            hard: r.hard,
            llr: Some(r.llr),
            update_count: r.update_count,
        }
    }
}

/// Writes one CSV row of LLRs per block, prefixed by the block index.
pub fn write_llr_csv<W: Write>(mut w: W, blocks: &[Vec<f64>]) -> std::io::Result<()> {
    let width = blocks.iter().map(Vec::len).max().unwrap_or(0);
    let mut header = vec!["block".to_string()];
    header.extend((0..width).map(|k| format!("llr{k}")));
    writeln!(w, "{}", header.join(","))?;
    for (i, llr) in blocks.iter().enumerate() {
        let mut row = vec![i.to_string()];
        row.extend(llr.iter().map(|x| format!("{x:e}")));
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}
