//! Probabilistic data association over the whitened block model
//! `y = G a + n`, `a` in `{-1, +1}^N`, `n ~ N(0, sigma^2 I)`.
//!
//! For each symbol `k` the other symbols are replaced by a Gaussian with
//! matched moments, `w_k ~ N(mu_k, C_k)` where
//!
//! ```text
//! mu_k = sum_{j != k} (2 P_j - 1) g_j
//! C_k  = sum_{j != k} 4 P_j (1 - P_j) g_j g_j^T + sigma^2 I
//! ```
//!
//! and the posterior becomes `P_k = 1 / (1 + exp(-2 (y - mu_k)^T C_k^-1 g_k))`.
//!
//! The state keeps the full working covariance `S = C_k + var_k g_k g_k^T`
//! together with `S^-1`. Both follow every posterior change through rank-one
//! corrections, so `C_k^-1 g_k = S^-1 g_k / (1 - var_k g_k^T S^-1 g_k)` costs
//! one banded matrix-vector product. `S^-1` is rebuilt from a Cholesky
//! factorization at the start of every sweep.

use super::DetectionResult;
use crate::error::{Error, Result};
use crate::isi::IsiMatrix;
use nalgebra::{Cholesky, DMatrix, DVector};

/// Magnitude at which the log-likelihood ratio is clamped before `exp`.
pub const LLR_CLAMP: f64 = 500.0;

/// Default number of sweeps over the active set.
pub const DEFAULT_SWEEPS: usize = 8;

/// Mutable detector state for one block.
#[derive(Debug, Clone)]
pub struct PdaState {
    sigma2: f64,
    p_a: Vec<f64>,
    var: Vec<f64>,
    mean: Vec<f64>,
    llr: Vec<f64>,
    /// Symbols still being updated (`F`).
    active: Vec<bool>,
    /// Symbols snapped to a hard decision by the confidence region.
    frozen: Vec<bool>,
    /// `sum_j var_j g_j g_j^T + sigma^2 I`.
    cov: DMatrix<f64>,
    cov_inv: DMatrix<f64>,
    /// `g_k^T cov^-1 g_k`.
    quad: Vec<f64>,
    /// `sum_j mean_j g_j`.
    mean_sum: Vec<f64>,
    update_count: usize,
}

fn check_sigma2(sigma2: f64) -> Result<()> {
    if sigma2 > 0.0 && sigma2.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidNoiseVariance(sigma2))
    }
}

/// Logistic map from an LLR to `P(a = +1)`, with the exponent clamped.
pub fn posterior_from_llr(llr: f64) -> f64 {
    1.0 / (1.0 + (-llr.clamp(-LLR_CLAMP, LLR_CLAMP)).exp())
}

impl PdaState {
    /// All symbols active with `P_a = 1/2`.
    pub fn new(g: &IsiMatrix, sigma2: f64) -> Result<Self> {
        Self::with_priors(g, sigma2, &vec![0.5; g.n()])
    }

    /// State with the given posteriors; symbols at exactly 0 or 1 still count
    /// as active.
    pub fn with_priors(g: &IsiMatrix, sigma2: f64, priors: &[f64]) -> Result<Self> {
        check_sigma2(sigma2)?;
        let n = g.n();
        if priors.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: priors.len(),
            });
        }
        if priors.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::Invalid("prior probabilities must lie in [0, 1]".into()));
        }
        let mut state = Self {
            sigma2,
            p_a: priors.to_vec(),
            var: priors.iter().map(|p| 4.0 * p * (1.0 - p)).collect(),
            mean: priors.iter().map(|p| 2.0 * p - 1.0).collect(),
            llr: vec![0.0; n],
            active: vec![true; n],
            frozen: vec![false; n],
            cov: DMatrix::zeros(n, n),
            cov_inv: DMatrix::zeros(n, n),
            quad: vec![0.0; n],
            mean_sum: vec![0.0; n],
            update_count: 0,
        };
        state.refresh(g)?;
        Ok(state)
    }

    pub fn n(&self) -> usize {
        self.p_a.len()
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    pub fn posteriors(&self) -> &[f64] {
        &self.p_a
    }

    pub fn variances(&self) -> &[f64] {
        &self.var
    }

    pub fn llrs(&self) -> &[f64] {
        &self.llr
    }

    pub fn update_count(&self) -> usize {
        self.update_count
    }

    pub fn is_active(&self, k: usize) -> bool {
        self.active[k]
    }

    pub fn is_frozen(&self, k: usize) -> bool {
        self.frozen[k]
    }

    /// Incrementally maintained working covariance.
    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.cov
    }

    pub fn covariance_inverse(&self) -> &DMatrix<f64> {
        &self.cov_inv
    }

    /// Working covariance assembled from the current variances.
    pub fn assemble_covariance(&self, g: &IsiMatrix) -> DMatrix<f64> {
        let scaled = DMatrix::from_fn(g.n(), g.n(), |i, j| g.get(i, j) * self.var[j]);
        let mut cov = scaled * g.entries().transpose();
        for i in 0..g.n() {
            cov[(i, i)] += self.sigma2;
        }
        cov
    }

    /// `C_k`: the working covariance without symbol `k`'s own contribution.
    pub fn conditional_covariance(&self, g: &IsiMatrix, k: usize) -> DMatrix<f64> {
        let mut cov = self.assemble_covariance(g);
        let col = g.entries().column(k);
        cov.ger(-self.var[k], &col, &col, 1.0);
        cov
    }

    /// Rebuilds the covariance, its inverse and the derived quantities from
    /// scratch.
    pub fn refresh(&mut self, g: &IsiMatrix) -> Result<()> {
        let n = g.n();
        if self.n() != n {
            return Err(Error::DimensionMismatch {
                expected: self.n(),
                got: n,
            });
        }
        self.cov = self.assemble_covariance(g);
        self.cov_inv = Cholesky::new(self.cov.clone())
            .ok_or(Error::NotPositiveDefinite)?
            .inverse();
        self.mean_sum = g.apply(&self.mean);
        for k in 0..n {
            let s = self.inv_times_column(g, k);
            self.quad[k] = column_dot(g, k, &s);
        }
        Ok(())
    }

    /// `cov^-1 g_k`.
    fn inv_times_column(&self, g: &IsiMatrix, k: usize) -> DVector<f64> {
        let (lo, hi) = g.column_support(k);
        let n = g.n();
        let mut s = DVector::zeros(n);
        for r in lo..hi {
            let gr = g.get(r, k);
            if gr != 0.0 {
                s.axpy(gr, &self.cov_inv.column(r), 1.0);
            }
        }
        s
    }

    /// `C_k^-1 g_k`, the interference-whitening filter for symbol `k`.
    pub fn conditional_filter(&self, g: &IsiMatrix, k: usize) -> DVector<f64> {
        let s = self.inv_times_column(g, k);
        let d = column_dot(g, k, &s);
        s / (1.0 - self.var[k] * d)
    }

    /// Ordering metric `D_k = g_k^T C_k^-1 g_k`.
    pub fn ordering_metric(&self, k: usize) -> f64 {
        let d = self.quad[k];
        d / (1.0 - self.var[k] * d)
    }

    /// Index in `pending` with the largest `D_k`; ties go to the lowest index.
    pub fn next_index(&self, pending: &[bool]) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for (k, _) in pending.iter().enumerate().filter(|(_, p)| **p) {
            let d = self.ordering_metric(k);
            match best {
                Some((_, b)) if d <= b => {}
                _ => best = Some((k, d)),
            }
        }
        best.map(|(k, _)| k)
    }

    /// Sets symbol `k`'s mean and variance, updating the covariance, its
    /// inverse, the `g^T S^-1 g` cache and `G E[a]` by rank-one corrections.
    fn set_moments(&mut self, g: &IsiMatrix, k: usize, mean: f64, var: f64) {
        let (lo, hi) = g.column_support(k);
        let dm = mean - self.mean[k];
        if dm != 0.0 {
            for r in lo..hi {
                self.mean_sum[r] += dm * g.get(r, k);
            }
        }
        self.mean[k] = mean;
        let dv = var - self.var[k];
        self.var[k] = var;
        if dv == 0.0 {
            return;
        }
        for i in lo..hi {
            let gi = g.get(i, k);
            for j in lo..hi {
                self.cov[(i, j)] += dv * gi * g.get(j, k);
            }
        }
        let s = self.inv_times_column(g, k);
        let d = column_dot(g, k, &s);
        let c = dv / (1.0 + dv * d);
        self.cov_inv.ger(-c, &s, &s, 1.0);
        for j in 0..g.n() {
            let t = column_dot(g, j, &s);
            self.quad[j] -= c * t * t;
        }
    }

    /// Posterior update of symbol `k` from the observation `y`.
    ///
    /// Returns the new `P_a(k)`; the clamped exponent is kept as the LLR.
    pub fn update(&mut self, g: &IsiMatrix, y: &[f64], k: usize) -> Result<f64> {
        let n = self.n();
        if k >= n {
            return Err(Error::IndexOutOfRange { index: k, len: n });
        }
        if y.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: y.len(),
            });
        }
        let s = self.inv_times_column(g, k);
        let d = column_dot(g, k, &s);
        let denom = 1.0 - self.var[k] * d;
        // (y - mu_k)^T S^-1 g_k with mu_k = mean_sum - mean_k g_k
        let mut proj = 0.0;
        for i in 0..n {
            proj += (y[i] - self.mean_sum[i] + self.mean[k] * g.get(i, k)) * s[i];
        }
        let llr = (2.0 * proj / denom).clamp(-LLR_CLAMP, LLR_CLAMP);
        let p = posterior_from_llr(llr);
        self.llr[k] = llr;
        self.p_a[k] = p;
        self.set_moments(g, k, 2.0 * p - 1.0, 4.0 * p * (1.0 - p));
        self.update_count += 1;
        Ok(p)
    }

    /// Snaps symbol `k` to the hard posterior `d` in `{0, 1}` and removes it
    /// from the active set.
    pub fn freeze(&mut self, g: &IsiMatrix, k: usize, d: f64) {
        let d = if d >= 0.5 { 1.0 } else { 0.0 };
        self.p_a[k] = d;
        self.llr[k] = if d == 1.0 { LLR_CLAMP } else { -LLR_CLAMP };
        self.active[k] = false;
        self.frozen[k] = true;
        self.set_moments(g, k, 2.0 * d - 1.0, 0.0);
    }

    /// Treats symbol `k` as detected: its variance drops to zero while the
    /// mean is left alone. Used to condition on already-detected symbols.
    pub fn retire(&mut self, g: &IsiMatrix, k: usize) {
        self.active[k] = false;
        let mean = self.mean[k];
        self.set_moments(g, k, mean, 0.0);
    }

    /// Freezes every active symbol whose posterior is within `epsilon` of 0
    /// or 1. Returns how many were frozen.
    pub fn freeze_confident(&mut self, g: &IsiMatrix, epsilon: f64) -> usize {
        let mut count = 0;
        for k in 0..self.n() {
            if !self.active[k] {
                continue;
            }
            let p = self.p_a[k];
            if p.abs() < epsilon {
                self.freeze(g, k, 0.0);
                count += 1;
            } else if (p - 1.0).abs() < epsilon {
                self.freeze(g, k, 1.0);
                count += 1;
            }
        }
        count
    }

    /// One pass over the active set in dynamic `argmax D_k` order. Returns the
    /// visitation order.
    pub fn sweep(&mut self, g: &IsiMatrix, y: &[f64]) -> Result<Vec<usize>> {
        let mut pending = self.active.clone();
        let mut order = Vec::with_capacity(pending.iter().filter(|p| **p).count());
        while let Some(k) = self.next_index(&pending) {
            self.update(g, y, k)?;
            pending[k] = false;
            order.push(k);
        }
        Ok(order)
    }

    pub fn into_result(self, sweeps: usize) -> DetectionResult {
        let hard = self
            .p_a
            .iter()
            .map(|p| if *p >= 0.5 { 1.0 } else { -1.0 })
            .collect();
        DetectionResult {
            hard,
            posteriors: self.p_a,
            llr: self.llr,
            update_count: self.update_count,
            sweeps,
        }
    }
}

/// Posterior update of symbol `k`; see [`PdaState::update`].
pub fn pda_posterior_update(state: &mut PdaState, k: usize, y: &[f64], g: &IsiMatrix) -> Result<f64> {
    state.update(g, y, k)
}

fn column_dot(g: &IsiMatrix, k: usize, x: &DVector<f64>) -> f64 {
    let (lo, hi) = g.column_support(k);
    (lo..hi).map(|r| g.get(r, k) * x[r]).sum()
}

fn check_inputs(y: &[f64], g: &IsiMatrix, sweeps: usize) -> Result<()> {
    if sweeps < 1 {
        return Err(Error::InvalidSweepCount);
    }
    if y.len() != g.n() {
        return Err(Error::DimensionMismatch {
            expected: g.n(),
            got: y.len(),
        });
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteObservation);
    }
    Ok(())
}

/// PDA detection with `sweeps` full passes.
pub fn pda_detect(y: &[f64], g: &IsiMatrix, sigma2: f64, sweeps: usize) -> Result<DetectionResult> {
    modified_pda_detect(y, g, sigma2, sweeps, 0.0)
}

/// PDA detection where, before every sweep, symbols whose posterior is
/// within `epsilon` of 0 or 1 are frozen at that value and skipped from then
/// on. `epsilon = 0` reproduces [`pda_detect`].
pub fn modified_pda_detect(
    y: &[f64],
    g: &IsiMatrix,
    sigma2: f64,
    sweeps: usize,
    epsilon: f64,
) -> Result<DetectionResult> {
    if !(0.0..0.5).contains(&epsilon) {
        return Err(Error::InvalidEpsilon(epsilon));
    }
    check_inputs(y, g, sweeps)?;
    let mut state = PdaState::new(g, sigma2)?;
    let mut performed = 0;
    for _ in 0..sweeps {
        if epsilon > 0.0 {
            state.freeze_confident(g, epsilon);
        }
        if !state.active.iter().any(|a| *a) {
            break;
        }
        state.refresh(g)?;
        state.sweep(g, y)?;
        performed += 1;
    }
    Ok(state.into_result(performed))
}

/// Greedy `argmax D_k` visitation order when each visited symbol is treated
/// as detected (its variance drops to zero) and unvisited symbols keep
/// `P_a = 1/2`.
///
/// This is the PDA ordering rule in the regime where every update saturates;
/// it depends only on `G` and `sigma^2`.
pub fn detection_order(g: &IsiMatrix, sigma2: f64) -> Result<Vec<usize>> {
    let mut state = PdaState::new(g, sigma2)?;
    let mut pending = vec![true; g.n()];
    let mut order = Vec::with_capacity(g.n());
    while let Some(k) = state.next_index(&pending) {
        state.retire(g, k);
        pending[k] = false;
        order.push(k);
    }
    Ok(order)
}
