//! Conditionally linear and conditionally Gaussian separability margins.
//!
//! For a linear filter `c`, symbol `k` is separable from a set of
//! interferers `J` whenever `c^T g_k - sum_{j in J} |c^T g_j| > 0`. With
//! `c = e_k` and `J` the symbols inside the ISI window this is the linear
//! margin `delta_k`; with `c = R^-1 g_k`, `R` the interference-plus-noise
//! covariance of the undetected symbols, it is the Gaussian margin.

use crate::detect::PdaState;
use crate::error::{Error, Result};
use crate::isi::{build_isi_matrix, channel_factor, Domain, IsiMatrix, TapSource};
use crate::pulse::{isi_taps, PulseConfig};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::io::Write;

pub const DEFAULT_BLOCK_LEN: usize = 100;

/// `|c^T g_k| - sum_{j in interferers} |c^T g_j|`.
pub fn filter_margin(g: &IsiMatrix, k: usize, c: &DVector<f64>, interferers: &[usize]) -> f64 {
    let proj = |j: usize| g.entries().column(j).dot(c);
    proj(k).abs() - interferers.iter().map(|j| proj(*j).abs()).sum::<f64>()
}

/// Off-diagonal ISI magnitude at distance `d`, taken from whichever side
/// of the band is populated.
fn off_diagonal(g: &IsiMatrix, d: usize) -> f64 {
    let d = d as isize;
    g.lag(-d).abs().max(g.lag(d).abs())
}

/// Worst-case linear margins `delta_k = |t_0| - sum_{d=1}^{w_k} |t_d|`,
/// where the window `w_k = min(L - 1, N - 1 - k)` shortens at the block end.
pub fn linear_margins(g: &IsiMatrix) -> Vec<f64> {
    let n = g.n();
    let span = (1..n).rev().find(|d| off_diagonal(g, *d) != 0.0).unwrap_or(0);
    let main = g.lag(0).abs();
    (0..n)
        .map(|k| {
            let window = span.min(n - 1 - k);
            main - (1..=window).map(|d| off_diagonal(g, d)).sum::<f64>()
        })
        .collect()
}

/// Gaussian margin of symbol `k` given the detected set `detected`.
///
/// `R = sum_{j not in detected, j != k} g_j g_j^T + sigma2 I` is factored
/// directly; see [`gaussian_margins`] for the incremental version along the
/// detection order.
pub fn gaussian_margin(g: &IsiMatrix, k: usize, detected: &[usize], sigma2: f64) -> Result<f64> {
    if !(sigma2 > 0.0) {
        return Err(Error::InvalidNoiseVariance(sigma2));
    }
    let n = g.n();
    if let Some(&bad) = detected.iter().chain(Some(&k)).find(|i| **i >= n) {
        return Err(Error::IndexOutOfRange { index: bad, len: n });
    }
    if detected.contains(&k) {
        return Err(Error::ConditionedSymbol(k));
    }
    let rest: Vec<usize> = (0..n).filter(|j| *j != k && !detected.contains(j)).collect();
    let cols = DMatrix::from_fn(n, rest.len(), |i, c| g.get(i, rest[c]));
    let mut r = &cols * cols.transpose();
    for i in 0..n {
        r[(i, i)] += sigma2;
    }
    let chol = r.cholesky().ok_or(Error::NotPositiveDefinite)?;
    let c = chol.solve(&g.entries().column(k).into_owned());
    Ok(filter_margin(g, k, &c, &rest))
}

/// Gaussian margins along the greedy detection order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianMargins {
    /// Visitation order `i_1, i_2, ...`.
    pub order: Vec<usize>,
    /// `margins[t]` belongs to symbol `order[t]`, conditioned on `order[..t]`.
    pub margins: Vec<f64>,
}

/// Margins for every symbol when symbols are detected one at a time in
/// the PDA `argmax D_k` order, each conditioned on those before it.
pub fn gaussian_margins(g: &IsiMatrix, sigma2: f64) -> Result<GaussianMargins> {
    let n = g.n();
    let mut state = PdaState::new(g, sigma2)?;
    let mut pending = vec![true; n];
    let mut order = Vec::with_capacity(n);
    let mut margins = Vec::with_capacity(n);
    while let Some(k) = state.next_index(&pending) {
        pending[k] = false;
        let c = state.conditional_filter(g, k);
        let rest: Vec<usize> = (0..n).filter(|j| pending[*j]).collect();
        margins.push(filter_margin(g, k, &c, &rest));
        order.push(k);
        state.retire(g, k);
    }
    Ok(GaussianMargins { order, margins })
}

/// How a table's SNR axis maps to `(G, sigma^2)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SnrConvention {
    /// Unit-diagonal Gram matrix and `sigma^2 = 10^(-SNR/10)`.
    UnitDiagonal,
    /// Amplitude `sqrt(tau Es)` with `Es = 1` and `SNR = amp^2 / sigma^2`.
    SymbolEnergy,
}

impl SnrConvention {
    pub fn as_str(&self) -> &'static str {
        match self {
            SnrConvention::UnitDiagonal => "unit_diagonal",
            SnrConvention::SymbolEnergy => "symbol_energy",
        }
    }

    pub fn amplitude(&self, tau: f64) -> f64 {
        match self {
            SnrConvention::UnitDiagonal => 1.0,
            SnrConvention::SymbolEnergy => tau.sqrt(),
        }
    }

    pub fn sigma2(&self, tau: f64, snr_db: f64) -> f64 {
        let a = self.amplitude(tau);
        a * a * 10f64.powf(-snr_db / 10.0)
    }
}

/// Matrix domain and SNR convention of one margin table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarginSettings {
    pub domain: Domain,
    pub snr: SnrConvention,
    pub pulse: PulseConfig,
}

impl MarginSettings {
    /// Gram matrix with unit diagonal, the default for reports.
    pub fn calibrated(beta: f64) -> Self {
        Self {
            domain: Domain::Gram,
            snr: SnrConvention::UnitDiagonal,
            pulse: PulseConfig::new(beta),
        }
    }

    pub fn is_calibrated(&self) -> bool {
        self.domain == Domain::Gram && self.snr == SnrConvention::UnitDiagonal
    }

    fn matrix(&self, tau: f64, n: usize) -> Result<IsiMatrix> {
        let taps = isi_taps(&self.pulse, tau)?;
        let es = self.snr.amplitude(tau).powi(2) / tau;
        match self.domain {
            Domain::Gram => build_isi_matrix(TapSource::Gram(&taps), n, tau, es),
            Domain::Convolution => {
                let factor = channel_factor(&taps);
                build_isi_matrix(TapSource::Convolution(&factor), n, tau, es)
            }
        }
    }
}

/// Gaussian margins at one SNR.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianRow {
    pub snr_db: f64,
    pub sigma2: f64,
    pub order: Vec<usize>,
    pub margins: Vec<f64>,
    pub max: f64,
    pub ave: f64,
}

/// Linear and Gaussian margins of one `(beta, tau)` model. Aggregates are
/// kept signed; [`clamp_display`] applies the zero floor used in tables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginReport {
    pub beta: f64,
    pub tau: f64,
    pub n: usize,
    pub settings: MarginSettings,
    pub delta: Vec<f64>,
    pub delta_max: f64,
    pub delta_ave: f64,
    pub gaussian: Vec<GaussianRow>,
}

impl MarginReport {
    pub fn snr_list(&self) -> Vec<f64> {
        self.gaussian.iter().map(|r| r.snr_db).collect()
    }

    pub fn sigma2_list(&self) -> Vec<f64> {
        self.gaussian.iter().map(|r| r.sigma2).collect()
    }

    pub fn row(&self, snr_db: f64) -> Option<&GaussianRow> {
        self.gaussian.iter().find(|r| (r.snr_db - snr_db).abs() < 1e-9)
    }
}

pub fn clamp_display(x: f64) -> f64 {
    x.max(0.0)
}

fn max_ave(x: &[f64]) -> (f64, f64) {
    let max = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (max, x.iter().sum::<f64>() / x.len() as f64)
}

/// Margins of one model under the given settings.
pub fn margin_report_for(
    settings: &MarginSettings,
    tau: f64,
    snr_list: &[f64],
    n: usize,
) -> Result<MarginReport> {
    let g = settings.matrix(tau, n)?;
    let delta = linear_margins(&g);
    let (delta_max, delta_ave) = max_ave(&delta);
    let gaussian = snr_list
        .iter()
        .map(|&snr_db| {
            let sigma2 = settings.snr.sigma2(tau, snr_db);
            let gm = gaussian_margins(&g, sigma2)?;
            let (max, ave) = max_ave(&gm.margins);
            Ok(GaussianRow {
                snr_db,
                sigma2,
                order: gm.order,
                margins: gm.margins,
                max,
                ave,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(MarginReport {
        beta: settings.pulse.beta,
        tau,
        n,
        settings: *settings,
        delta,
        delta_max,
        delta_ave,
        gaussian,
    })
}

/// Margin reports over a `tau` grid, for both matrix domains under both SNR
/// conventions. The calibrated table comes first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginTable {
    pub reports: Vec<MarginReport>,
}

impl MarginTable {
    pub fn calibrated(&self) -> impl Iterator<Item = &MarginReport> {
        self.reports.iter().filter(|r| r.settings.is_calibrated())
    }

    pub fn find(&self, settings: &MarginSettings, tau: f64) -> Option<&MarginReport> {
        self.reports
            .iter()
            .find(|r| r.settings == *settings && (r.tau - tau).abs() < 1e-12)
    }

    /// Aligned text with one linear block and one Gaussian block per setting.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let mut seen: Vec<MarginSettings> = Vec::new();
        for r in &self.reports {
            if !seen.contains(&r.settings) {
                seen.push(r.settings);
            }
        }
        for s in seen {
            let reports: Vec<&MarginReport> =
                self.reports.iter().filter(|r| r.settings == s).collect();
            let mark = if s.is_calibrated() { " [calibrated]" } else { "" };
            let _ = writeln!(
                out,
                "domain={} snr={} beta={} N={}{mark}",
                s.domain.as_str(),
                s.snr.as_str(),
                s.pulse.beta,
                reports[0].n
            );
            let _ = write!(out, "{:>10}", "tau");
            for r in &reports {
                let _ = write!(out, "{:>16}", r.tau);
            }
            let _ = write!(out, "\n{:>10}", "linear");
            for r in &reports {
                let cell = format!(
                    "({:.2}, {:.2})",
                    clamp_display(r.delta_max),
                    clamp_display(r.delta_ave)
                );
                let _ = write!(out, "{cell:>16}");
            }
            out.push('\n');
            for snr in reports[0].snr_list() {
                let _ = write!(out, "{:>7} dB", snr);
                for r in &reports {
                    let cell = match r.row(snr) {
                        Some(row) => format!(
                            "({:.2}, {:.2})",
                            clamp_display(row.max),
                            clamp_display(row.ave)
                        ),
                        None => "-".into(),
                    };
                    let _ = write!(out, "{cell:>16}");
                }
                out.push('\n');
            }
            out.push('\n');
        }
        out
    }

    /// CSV with one row per `(setting, tau, snr)`; the linear margins repeat
    /// on every SNR row of a model.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(
            w,
            "beta,tau,snr_db,delta_max,delta_ave,gauss_max,gauss_ave,domain,snr_convention,calibrated"
        )?;
        for r in &self.reports {
            for row in &r.gaussian {
                writeln!(
                    w,
                    "{},{},{},{},{},{},{},{},{},{}",
                    r.beta,
                    r.tau,
                    row.snr_db,
                    clamp_display(r.delta_max),
                    clamp_display(r.delta_ave),
                    clamp_display(row.max),
                    clamp_display(row.ave),
                    r.settings.domain.as_str(),
                    r.settings.snr.as_str(),
                    r.settings.is_calibrated()
                )?;
            }
        }
        Ok(())
    }
}

/// Reports for every setting over the grid, calibrated setting first.
pub fn margin_report_grid(
    pulse: PulseConfig,
    tau_list: &[f64],
    snr_list: &[f64],
    n: usize,
) -> Result<MarginTable> {
    pulse.validate()?;
    if n < 1 {
        return Err(Error::EmptyBlock);
    }
    let mut reports = Vec::new();
    for (domain, snr) in [
        (Domain::Gram, SnrConvention::UnitDiagonal),
        (Domain::Gram, SnrConvention::SymbolEnergy),
        (Domain::Convolution, SnrConvention::UnitDiagonal),
        (Domain::Convolution, SnrConvention::SymbolEnergy),
    ] {
        let settings = MarginSettings { domain, snr, pulse };
        for &tau in tau_list {
            reports.push(margin_report_for(&settings, tau, snr_list, n)?);
        }
    }
    Ok(MarginTable { reports })
}

/// Margin tables with default tap truncation.
pub fn margin_report(beta: f64, tau_list: &[f64], snr_list: &[f64], n: usize) -> Result<MarginTable> {
    margin_report_grid(PulseConfig::new(beta), tau_list, snr_list, n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detect::detection_order;

    fn gram(tau: f64, n: usize) -> IsiMatrix {
        MarginSettings::calibrated(0.3).matrix(tau, n).unwrap()
    }

    #[test]
    fn nyquist_margins_are_unit() {
        let g = gram(1.0, 12);
        assert!(linear_margins(&g).iter().all(|d| *d == 1.0));
        for k in 0..12 {
            assert!((gaussian_margin(&g, k, &[], 1.0).unwrap() - 1.0).abs() < 1e-12);
        }
        let gm = gaussian_margins(&g, 1.0).unwrap();
        assert!(gm.margins.iter().all(|m| (m - 1.0).abs() < 1e-12));
    }

    #[test]
    fn linear_margin_window_shrinks_at_block_end() {
        let taps = isi_taps(&PulseConfig::new(0.3), 0.8).unwrap();
        let g = gram(0.8, 50);
        let d = linear_margins(&g);
        let full: f64 = taps.one_sided()[1..].iter().map(|x| x.abs()).sum();
        assert!((d[0] - (1.0 - full)).abs() < 1e-14);
        assert_eq!(d[49], 1.0);
        assert!((d[48] - (1.0 - taps.get(1).abs())).abs() < 1e-14);
    }

    #[test]
    fn unit_filter_reduces_to_linear_margin() {
        let g = gram(0.7, 40);
        let delta = linear_margins(&g);
        let bw = g.bandwidth();
        for k in [0, 5, 20, 39] {
            let mut e = DVector::zeros(40);
            e[k] = 1.0;
            let window: Vec<usize> = (k + 1..(k + bw).min(40)).collect();
            assert!((filter_margin(&g, k, &e, &window) - delta[k]).abs() < 1e-14);
        }
    }

    #[test]
    fn incremental_margins_match_direct_factorization() {
        let g = gram(0.8, 24);
        let sigma2 = 10f64.powf(-0.4);
        let gm = gaussian_margins(&g, sigma2).unwrap();
        for t in [0, 1, 7, 15, 23] {
            let k = gm.order[t];
            let direct = gaussian_margin(&g, k, &gm.order[..t], sigma2).unwrap();
            assert!((gm.margins[t] - direct).abs() < 1e-9, "t={t}");
        }
        assert_eq!(gm.order, detection_order(&g, sigma2).unwrap());
    }

    #[test]
    fn linear_margins_ignore_noise() {
        let a = margin_report_for(&MarginSettings::calibrated(0.3), 0.8, &[0.0], 30).unwrap();
        let b = margin_report_for(&MarginSettings::calibrated(0.3), 0.8, &[8.0], 30).unwrap();
        assert_eq!(a.delta, b.delta);
    }

    #[test]
    fn rejects_conditioned_target() {
        let g = gram(0.8, 5);
        assert_eq!(gaussian_margin(&g, 2, &[2], 1.0), Err(Error::ConditionedSymbol(2)));
        assert_eq!(
            gaussian_margin(&g, 0, &[], 0.0),
            Err(Error::InvalidNoiseVariance(0.0))
        );
    }

    #[test]
    fn gaussian_margins_grow_with_snr() {
        let r = margin_report_for(&MarginSettings::calibrated(0.3), 0.8, &[0.0, 4.0, 8.0], 40).unwrap();
        let max: Vec<f64> = r.gaussian.iter().map(|x| x.max).collect();
        let ave: Vec<f64> = r.gaussian.iter().map(|x| x.ave).collect();
        assert!(max.windows(2).all(|w| w[1] > w[0]));
        assert!(ave.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn table_outputs() {
        let t = margin_report(0.3, &[0.8, 1.0], &[0.0, 2.0], 16).unwrap();
        assert_eq!(t.reports.len(), 8);
        assert_eq!(t.calibrated().count(), 2);
        let text = t.to_text();
        assert!(text.contains("[calibrated]"));
        let mut csv = Vec::new();
        t.write_csv(&mut csv).unwrap();
        let csv = String::from_utf8(csv).unwrap();
        assert_eq!(csv.lines().count(), 1 + 8 * 2);
        let nyq = t.find(&MarginSettings::calibrated(0.3), 1.0).unwrap();
        assert_eq!(nyq.delta_max, 1.0);
        assert!((nyq.row(0.0).unwrap().ave - 1.0).abs() < 1e-12);
    }
}
