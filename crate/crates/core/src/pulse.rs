//! Raised-cosine autocorrelation pulse and its FTN-spaced samples.
//!
//! The transmit pulse is a unit-energy root-raised-cosine, so the matched
//! filter output pulse is the raised cosine. Time is measured in units of
//! the symbol period `T`.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Distance from the removable singularity at `|t| = 1/(2 beta)` inside
/// which the analytic limit is used.
const SINGULARITY_WINDOW: f64 = 1e-8;

pub const DEFAULT_TAP_THRESHOLD: f64 = 1e-4;
pub const DEFAULT_MAX_HALF_SPAN: usize = 40;

/// Pulse shape and tap truncation parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PulseConfig {
    /// Roll-off factor in `[0, 1]`.
    pub beta: f64,
    /// Taps with magnitude below this are dropped from the tail.
    #[serde(default = "default_threshold")]
    pub tap_threshold: f64,
    /// Upper bound on the one-sided tap count `L - 1`.
    #[serde(default = "default_half_span")]
    pub max_half_span: usize,
}

fn default_threshold() -> f64 {
    DEFAULT_TAP_THRESHOLD
}

fn default_half_span() -> usize {
    DEFAULT_MAX_HALF_SPAN
}

impl PulseConfig {
    pub fn new(beta: f64) -> Self {
        Self {
            beta,
            tap_threshold: DEFAULT_TAP_THRESHOLD,
            max_half_span: DEFAULT_MAX_HALF_SPAN,
        }
    }

    pub fn with_truncation(mut self, tap_threshold: f64, max_half_span: usize) -> Self {
        self.tap_threshold = tap_threshold;
        self.max_half_span = max_half_span;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.beta) {
            return Err(Error::InvalidBeta(self.beta));
        }
        if !(self.tap_threshold >= 0.0) {
            return Err(Error::Invalid(format!(
                "tap_threshold must be non-negative, got {}",
                self.tap_threshold
            )));
        }
        Ok(())
    }
}

fn sinc(t: f64) -> f64 {
    if t == 0.0 {
        1.0
    } else {
        let x = PI * t;
        x.sin() / x
    }
}

/// Raised-cosine pulse `g(t)` for roll-off `beta`, with `t` in symbol periods.
pub fn rc_value(t: f64, beta: f64) -> f64 {
    if beta > 0.0 {
        let edge = 1.0 / (2.0 * beta);
        if (t.abs() - edge).abs() < SINGULARITY_WINDOW {
            return PI / 4.0 * sinc(edge);
        }
    }
    let bt = 2.0 * beta * t;
    sinc(t) * (PI * beta * t).cos() / (1.0 - bt * bt)
}

/// Symmetric ISI tap sequence `g[k] = g(k tau T)` for `|k| < L`.
///
/// Only the causal half is stored; `g[-k] = g[k]` holds by construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IsiTaps {
    one_sided: Vec<f64>,
    tau: f64,
    beta: f64,
}

impl IsiTaps {
    /// Builds taps from an explicit causal half `g[0..L]`.
    pub fn from_one_sided(one_sided: Vec<f64>, tau: f64, beta: f64) -> Result<Self> {
        if one_sided.is_empty() {
            return Err(Error::Invalid("tap sequence is empty".into()));
        }
        check_tau(tau)?;
        Ok(Self {
            one_sided,
            tau,
            beta,
        })
    }

    /// One-sided support `L` (number of taps at lags `0..L`).
    pub fn len(&self) -> usize {
        self.one_sided.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// `g[0], g[1], ..., g[L-1]`.
    pub fn one_sided(&self) -> &[f64] {
        &self.one_sided
    }

    /// Tap at signed lag `k`; zero outside the support.
    pub fn get(&self, k: isize) -> f64 {
        self.one_sided
            .get(k.unsigned_abs())
            .copied()
            .unwrap_or(0.0)
    }

    /// `g[-(L-1)], ..., g[0], ..., g[L-1]`.
    pub fn two_sided(&self) -> Vec<f64> {
        let mut out: Vec<f64> = self.one_sided.iter().rev().copied().collect();
        out.extend_from_slice(&self.one_sided[1..]);
        out
    }

    /// Sum of off-peak tap magnitudes over both sides.
    pub fn isi_mass(&self) -> f64 {
        2.0 * self.one_sided[1..].iter().map(|g| g.abs()).sum::<f64>()
    }

    /// Evaluates `g[0] + 2 sum_k g[k] cos(k w)` on `points` frequencies in `[0, pi]`.
    pub fn sampled_spectrum(&self, points: usize) -> Vec<f64> {
        let points = points.max(2);
        (0..points)
            .map(|i| {
                let w = PI * i as f64 / (points - 1) as f64;
                self.spectrum_at(w)
            })
            .collect()
    }

    pub fn spectrum_at(&self, w: f64) -> f64 {
        self.one_sided
            .iter()
            .enumerate()
            .skip(1)
            .fold(self.one_sided[0], |acc, (k, g)| {
                acc + 2.0 * g * (w * k as f64).cos()
            })
    }
}

pub(crate) fn check_tau(tau: f64) -> Result<()> {
    if tau > 0.0 && tau <= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidTau(tau))
    }
}

/// Samples the raised-cosine pulse at multiples of `tau` and truncates the tail.
pub fn isi_taps(config: &PulseConfig, tau: f64) -> Result<IsiTaps> {
    config.validate()?;
    check_tau(tau)?;
    let samples: Vec<f64> = (0..=config.max_half_span)
        .map(|k| {
            if k == 0 {
                1.0
            } else {
                rc_value(k as f64 * tau, config.beta)
            }
        })
        .collect();
    let last = samples
        .iter()
        .rposition(|g| g.abs() >= config.tap_threshold)
        .unwrap_or(0);
    let mut one_sided = samples;
    one_sided.truncate(last + 1);
    Ok(IsiTaps {
        one_sided,
        tau,
        beta: config.beta,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rc_peak_and_zero_crossings() {
        assert_eq!(rc_value(0.0, 0.3), 1.0);
        for k in 1..20 {
            assert!(rc_value(k as f64, 0.3).abs() < 1e-15);
            assert!(rc_value(-(k as f64), 0.3).abs() < 1e-15);
        }
    }

    #[test]
    fn rc_half_symbol() {
        // sinc(0.5) cos(0.15 pi) / (1 - 0.09)
        let expected = (2.0 / PI) * (0.15 * PI).cos() / 0.91;
        assert!((rc_value(0.5, 0.3) - expected).abs() < 1e-15);
        assert!((rc_value(0.5, 0.3) - 0.6233).abs() < 5e-5);
    }

    #[test]
    fn rc_singularity_is_continuous() {
        for &beta in &[0.25, 0.3, 0.5, 1.0] {
            let edge = 1.0 / (2.0 * beta);
            let at = rc_value(edge, beta);
            let near = rc_value(edge + 1e-6, beta);
            assert!((at - near).abs() < 1e-5, "beta={beta}: {at} vs {near}");
            assert!((at - PI / 4.0 * sinc(edge)).abs() < 1e-15);
        }
    }

    #[test]
    fn nyquist_taps_have_no_isi() {
        let taps = isi_taps(&PulseConfig::new(0.3), 1.0).unwrap();
        assert_eq!(taps.len(), 1);
        assert_eq!(taps.one_sided(), &[1.0]);
        let loose = PulseConfig::new(0.3).with_truncation(0.0, 10);
        let taps = isi_taps(&loose, 1.0).unwrap();
        assert!(taps.one_sided()[1..].iter().all(|g| g.abs() < 1e-12));
    }

    #[test]
    fn ftn_taps_sample_the_pulse() {
        let taps = isi_taps(&PulseConfig::new(0.3), 0.8).unwrap();
        assert_eq!(taps.get(0), 1.0);
        assert_eq!(taps.get(1), rc_value(0.8, 0.3));
        assert_eq!(taps.get(-1), taps.get(1));
        let taps = isi_taps(&PulseConfig::new(0.3), 0.5).unwrap();
        assert!((taps.get(1) - 0.6233).abs() < 5e-5);
    }

    #[test]
    fn truncation_respects_threshold_and_cap() {
        let cfg = PulseConfig::new(0.3);
        let taps = isi_taps(&cfg, 0.7).unwrap();
        assert!(taps.len() <= cfg.max_half_span + 1);
        let last = *taps.one_sided().last().unwrap();
        assert!(last.abs() >= cfg.tap_threshold);
        for k in taps.len()..=cfg.max_half_span {
            assert!(rc_value(k as f64 * 0.7, 0.3).abs() < cfg.tap_threshold);
        }
        let capped = isi_taps(&cfg.with_truncation(0.0, 5), 0.7).unwrap();
        assert_eq!(capped.len(), 6);
    }

    #[test]
    fn rejects_bad_tau() {
        let cfg = PulseConfig::new(0.3);
        assert_eq!(isi_taps(&cfg, 0.0), Err(Error::InvalidTau(0.0)));
        assert_eq!(isi_taps(&cfg, 1.2), Err(Error::InvalidTau(1.2)));
        assert!(isi_taps(&cfg, -0.5).is_err());
    }

    #[test]
    fn isi_severity_decreases_with_tau() {
        let cfg = PulseConfig::new(0.3);
        let mass: Vec<f64> = [0.6, 0.7, 0.8, 0.9]
            .iter()
            .map(|&t| isi_taps(&cfg, t).unwrap().isi_mass())
            .collect();
        assert!(mass.windows(2).all(|w| w[0] >= w[1]), "{mass:?}");
    }

    #[test]
    fn two_sided_is_symmetric() {
        let taps = isi_taps(&PulseConfig::new(0.3), 0.8).unwrap();
        let g = taps.two_sided();
        let n = g.len();
        assert_eq!(n, 2 * taps.len() - 1);
        for i in 0..n {
            assert_eq!(g[i], g[n - 1 - i]);
        }
    }
}
