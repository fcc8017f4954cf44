//! Whitening of the ISI taps by spectral factorization and construction of
//! the block ISI matrices.
//!
//! Two matrix domains are used throughout:
//!
//! * **convolution**: `G[i][j] = amp * v[i - j]`, the whitened causal channel
//!   acting on the symbol block, so that `y = G a + n` with white noise;
//! * **gram**: `G[i][j] = amp^2 * g[|i - j|]`, the matched-filter Gram matrix
//!   appearing in the sequence-detection quadratic form.

use crate::error::{Error, Result};
use crate::poly;
use crate::pulse::{isi_taps, IsiTaps, PulseConfig};
use nalgebra::{Complex, DMatrix};
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use std::io::Write;

/// Spectrum values below `-NEGATIVE_SPECTRUM_TOL` reject a strict factorization.
pub const NEGATIVE_SPECTRUM_TOL: f64 = 1e-9;
/// Roots this close to the unit circle are split evenly between the factors.
pub const UNIT_CIRCLE_TOL: f64 = 1e-6;
/// Reconstruction bound on `|v * reverse(v) - g|`.
pub const RESIDUAL_BOUND: f64 = 1e-6;
/// Slack on the minimum-phase root condition.
pub const MIN_PHASE_SLACK: f64 = 1e-8;

/// Longest `v` for which roots are computed explicitly for the
/// minimum-phase report; longer factors rely on the step-down test.
const MAX_ROOT_REPORT_LEN: usize = 160;
/// Largest one-sided span tried when growing the tap support.
const MAX_GROWN_HALF_SPAN: usize = 8192;
/// Spectrum floor kept above zero after diagonal loading, relative to `g[0]`.
const LOADING_FLOOR: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FactorMethod {
    /// Root selection on the symmetric tap polynomial.
    Roots,
    /// Homomorphic (cepstral) factor of a diagonally loaded spectrum.
    Cepstral,
}

/// Causal minimum-phase factor `v` with `v[n] * v[-n] ~= g`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WhitenedTaps {
    pub v: Vec<f64>,
    /// Max-norm of `v * reverse(v) - g` over all lags.
    pub residual: f64,
    /// Amount added to `g[0]` before factoring (zero for a strict factor).
    pub loading: f64,
    /// Largest root modulus of `sum v[n] z^-n`, when computed.
    pub max_root_modulus: Option<f64>,
    /// Whether the step-down recursion certifies all roots inside the circle.
    pub step_down_stable: bool,
    pub method: FactorMethod,
}

impl WhitenedTaps {
    pub fn len(&self) -> usize {
        self.v.len()
    }

    pub fn is_empty(&self) -> bool {
        self.v.is_empty()
    }

    /// Minimum-phase condition: no root beyond `1 + MIN_PHASE_SLACK`.
    pub fn is_minimum_phase(&self) -> bool {
        match self.max_root_modulus {
            Some(m) => m <= 1.0 + MIN_PHASE_SLACK,
            None => self.step_down_stable,
        }
    }
}

/// Reconstruction error `max_k |(v * reverse(v))[k] - g[k]|`.
pub fn reconstruction_residual(v: &[f64], taps: &IsiTaps) -> f64 {
    let ac = poly::autocorrelation(v);
    let n = ac.len().max(taps.len());
    (0..n)
        .map(|k| (ac.get(k).copied().unwrap_or(0.0) - taps.get(k as isize)).abs())
        .fold(0.0, f64::max)
}

/// Smallest value of the tap spectrum on a dense frequency grid.
pub fn min_spectrum(taps: &IsiTaps) -> f64 {
    let points = (64 * taps.len()).max(1024);
    taps.sampled_spectrum(points)
        .into_iter()
        .fold(f64::INFINITY, f64::min)
}

fn finish(mut v: Vec<f64>, taps: &IsiTaps, loading: f64, method: FactorMethod) -> WhitenedTaps {
    let energy: f64 = v.iter().map(|x| x * x).sum();
    let target = taps.get(0) + loading;
    if energy > 0.0 {
        let scale = (target / energy).sqrt();
        v.iter_mut().for_each(|x| *x *= scale);
    }
    if v[0] < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
    let residual = reconstruction_residual(&v, taps);
    let max_root_modulus = (v.len() <= MAX_ROOT_REPORT_LEN).then(|| poly::max_root_modulus(&v));
    let step_down_stable = poly::reflection_coefficients(&v).is_some();
    WhitenedTaps {
        v,
        residual,
        loading,
        max_root_modulus,
        step_down_stable,
        method,
    }
}

/// Minimum-phase spectral factor of `g` by polynomial root selection.
///
/// Fails when the tap spectrum is negative beyond [`NEGATIVE_SPECTRUM_TOL`],
/// which happens when the truncated support is too short or, for
/// `tau < 1/(1+beta)`, because the folded spectrum vanishes on a band.
pub fn spectral_factorize(taps: &IsiTaps) -> Result<WhitenedTaps> {
    let min = min_spectrum(taps);
    if min < -NEGATIVE_SPECTRUM_TOL {
        return Err(Error::NegativeSpectrum {
            min_spectrum: min,
            tolerance: NEGATIVE_SPECTRUM_TOL,
        });
    }
    let l = taps.len();
    if l == 1 {
        return Ok(finish(vec![1.0], taps, 0.0, FactorMethod::Roots));
    }
    let all = poly::roots(&taps.two_sided());
    let mut inside: Vec<Complex<f64>> = Vec::with_capacity(l - 1);
    let mut on_circle: Vec<Complex<f64>> = Vec::new();
    for r in &all {
        let m = r.norm();
        if (m - 1.0).abs() <= UNIT_CIRCLE_TOL {
            on_circle.push(*r);
        } else if m < 1.0 {
            inside.push(*r);
        }
    }
    // Unit-circle roots of a non-negative spectrum have even multiplicity;
    // after sorting by angle the copies are adjacent.
    on_circle.sort_by(|a, b| a.arg().partial_cmp(&b.arg()).unwrap());
    inside.extend(on_circle.iter().step_by(2));
    if inside.len() != l - 1 {
        let mut by_modulus = all.clone();
        by_modulus.sort_by(|a, b| a.norm().partial_cmp(&b.norm()).unwrap());
        inside = by_modulus.into_iter().take(l - 1).collect();
    }
    let v = poly::from_roots(&inside);
    let factor = finish(v, taps, 0.0, FactorMethod::Roots);
    Ok(factor)
}

/// Minimum-phase factor of `g` after adding just enough to `g[0]` to make
/// the spectrum strictly positive.
///
/// This always succeeds; the applied loading and resulting residual are
/// recorded so callers can judge the approximation.
pub fn spectral_factorize_loaded(taps: &IsiTaps) -> WhitenedTaps {
    let l = taps.len();
    let nfft = (64 * l).max(1 << 14).next_power_of_two();
    let g = taps.one_sided();
    let mut buf = vec![Complex::new(0.0, 0.0); nfft];
    buf[0].re = g[0];
    for k in 1..l {
        buf[k].re = g[k];
        buf[nfft - k].re = g[k];
    }
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(nfft);
    let inv = planner.plan_fft_inverse(nfft);
    fwd.process(&mut buf);
    let min = buf.iter().map(|c| c.re).fold(f64::INFINITY, f64::min);
    let floor = LOADING_FLOOR * g[0];
    let loading = if min < floor { floor - min } else { 0.0 };

    // Real cepstrum of half the log spectrum, folded onto positive quefrency.
    let mut cep: Vec<Complex<f64>> = buf
        .iter()
        .map(|c| Complex::new(0.5 * (c.re + loading).ln(), 0.0))
        .collect();
    inv.process(&mut cep);
    let scale = 1.0 / nfft as f64;
    for (i, c) in cep.iter_mut().enumerate() {
        let w = match i {
            0 => 1.0,
            i if i < nfft / 2 => 2.0,
            i if i == nfft / 2 => 1.0,
            _ => 0.0,
        };
        *c = Complex::new(c.re * scale * w, 0.0);
    }
    fwd.process(&mut cep);
    for c in cep.iter_mut() {
        *c = c.exp();
    }
    inv.process(&mut cep);
    let v: Vec<f64> = cep[..l].iter().map(|c| c.re * scale).collect();
    finish(reflect_outside_roots(v), taps, loading, FactorMethod::Cepstral)
}

/// Mirrors roots outside the unit circle to `1 / conj(r)`. Truncating a
/// cepstral factor whose spectrum nearly vanishes can push roots just past
/// the circle; mirroring keeps the magnitude response up to a constant.
fn reflect_outside_roots(v: Vec<f64>) -> Vec<f64> {
    if v.len() < 2 || v.len() > MAX_ROOT_REPORT_LEN || v[0] == 0.0 {
        return v;
    }
    let rs = poly::roots(&v);
    if rs.iter().all(|r| r.norm() <= 1.0 + MIN_PHASE_SLACK) {
        return v;
    }
    let mirrored: Vec<Complex<f64>> = rs
        .iter()
        .map(|r| if r.norm() > 1.0 { r.conj().inv() } else { *r })
        .collect();
    poly::from_roots(&mirrored)
}

/// Outcome of [`whiten`]: the tap support actually used and its factor.
#[derive(Debug, Clone)]
pub struct Whitening {
    pub taps: IsiTaps,
    pub factor: WhitenedTaps,
}

/// Factors the taps of `(config, tau)` to within `residual_bound`, growing
/// the tap support when the truncated spectrum is not factorable.
///
/// A strict root factorization is tried on the configured support first.
/// Otherwise the support is doubled (with no magnitude threshold) and the
/// loaded cepstral factor is used, until the residual meets the bound.
pub fn whiten(config: &PulseConfig, tau: f64, residual_bound: f64) -> Result<Whitening> {
    let taps = isi_taps(config, tau)?;
    if let Ok(factor) = spectral_factorize(&taps) {
        if factor.residual < residual_bound {
            return Ok(Whitening { taps, factor });
        }
    }
    let mut span = config.max_half_span.max(8);
    let mut best: Option<Whitening> = None;
    while span <= MAX_GROWN_HALF_SPAN {
        let grown = isi_taps(&config.with_truncation(0.0, span), tau)?;
        let factor = spectral_factorize_loaded(&grown);
        let done = factor.residual < residual_bound;
        best = Some(Whitening {
            taps: grown,
            factor,
        });
        if done {
            break;
        }
        span *= 2;
    }
    let best = best.expect("at least one growth step runs");
    if best.factor.residual < residual_bound {
        Ok(best)
    } else {
        Err(Error::FactorizationResidual {
            residual: best.factor.residual,
            bound: residual_bound,
        })
    }
}

/// Whitened channel on the configured support: the strict factor when the
/// spectrum allows it, otherwise the loaded approximation.
pub fn channel_factor(taps: &IsiTaps) -> WhitenedTaps {
    match spectral_factorize(taps) {
        Ok(f) if f.residual < RESIDUAL_BOUND => f,
        _ => spectral_factorize_loaded(taps),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Domain {
    Convolution,
    Gram,
}

impl Domain {
    pub fn as_str(&self) -> &'static str {
        match self {
            Domain::Convolution => "convolution",
            Domain::Gram => "gram",
        }
    }
}

/// Source sequence for [`build_isi_matrix`]; the variant fixes the domain.
#[derive(Debug, Clone, Copy)]
pub enum TapSource<'a> {
    Gram(&'a IsiTaps),
    Convolution(&'a WhitenedTaps),
}

/// Signal amplitude `sqrt(tau Es)` of the sampled matched-filter model.
pub fn amplitude(tau: f64, es: f64) -> f64 {
    (tau * es).sqrt()
}

/// Banded Toeplitz ISI matrix of one block.
#[derive(Debug, Clone, PartialEq)]
pub struct IsiMatrix {
    entries: DMatrix<f64>,
    domain: Domain,
    amp: f64,
    /// Per column, the half-open row range holding its non-zero band.
    support: Vec<(usize, usize)>,
    /// Toeplitz coefficients `t[d]` for `d = i - j >= 0` (lower band).
    lower: Vec<f64>,
    /// Toeplitz coefficients `t[-d]` for `d = j - i >= 0` (upper band).
    upper: Vec<f64>,
}

impl IsiMatrix {
    fn from_bands(n: usize, lower: Vec<f64>, upper: Vec<f64>, domain: Domain, amp: f64) -> Self {
        let lower: Vec<f64> = lower.into_iter().take(n).collect();
        let upper: Vec<f64> = upper.into_iter().take(n).collect();
        let entries = DMatrix::from_fn(n, n, |i, j| {
            if i >= j {
                lower.get(i - j).copied().unwrap_or(0.0)
            } else {
                upper.get(j - i).copied().unwrap_or(0.0)
            }
        });
        let support = (0..n)
            .map(|j| {
                let lo = j + 1 - upper.len().min(j + 1);
                let hi = (j + lower.len()).min(n);
                (lo, hi)
            })
            .collect();
        Self {
            entries,
            domain,
            amp,
            support,
            lower,
            upper,
        }
    }

    /// `amp^2 g[|i-j|]`.
    pub fn gram(taps: &IsiTaps, n: usize, amp: f64) -> Result<Self> {
        if n < 1 {
            return Err(Error::EmptyBlock);
        }
        let a2 = amp * amp;
        let band: Vec<f64> = taps.one_sided().iter().map(|g| a2 * g).collect();
        Ok(Self::from_bands(n, band.clone(), band, Domain::Gram, amp))
    }

    /// `amp v[i-j]` for `0 <= i-j < L`.
    pub fn convolution(factor: &WhitenedTaps, n: usize, amp: f64) -> Result<Self> {
        if n < 1 {
            return Err(Error::EmptyBlock);
        }
        let band: Vec<f64> = factor.v.iter().map(|v| amp * v).collect();
        let upper = vec![band[0]];
        Ok(Self::from_bands(n, band, upper, Domain::Convolution, amp))
    }

    /// Square matrix without Toeplitz bookkeeping, for hand-built test channels.
    pub fn from_dense(entries: DMatrix<f64>, domain: Domain) -> Result<Self> {
        let n = entries.nrows();
        if n < 1 {
            return Err(Error::EmptyBlock);
        }
        if entries.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: entries.ncols(),
            });
        }
        let lower = (0..n).map(|d| entries[(d, 0)]).collect();
        let upper = (0..n).map(|d| entries[(0, d)]).collect();
        let support = (0..n)
            .map(|j| {
                let col = entries.column(j);
                let lo = col.iter().position(|x| *x != 0.0).unwrap_or(j);
                let hi = col.iter().rposition(|x| *x != 0.0).map_or(j + 1, |p| p + 1);
                (lo.min(j), hi.max(j + 1))
            })
            .collect();
        Ok(Self {
            entries,
            domain,
            amp: 1.0,
            support,
            lower,
            upper,
        })
    }

    pub fn n(&self) -> usize {
        self.entries.nrows()
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn amp(&self) -> f64 {
        self.amp
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[(i, j)]
    }

    /// Row range of the non-zero band of column `j`.
    pub fn column_support(&self, j: usize) -> (usize, usize) {
        self.support[j]
    }

    /// Toeplitz coefficient at lag `d = i - j` (zero outside the band).
    pub fn lag(&self, d: isize) -> f64 {
        if d >= 0 {
            self.lower.get(d as usize).copied().unwrap_or(0.0)
        } else {
            self.upper.get((-d) as usize).copied().unwrap_or(0.0)
        }
    }

    /// Number of non-zero lags on the lower side, including the diagonal.
    pub fn bandwidth(&self) -> usize {
        self.lower.iter().rposition(|x| *x != 0.0).map_or(1, |p| p + 1)
    }

    /// `G x` exploiting the band.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let n = self.n();
        let mut out = vec![0.0; n];
        for (j, xj) in x.iter().enumerate().take(n) {
            if *xj == 0.0 {
                continue;
            }
            let (lo, hi) = self.support[j];
            for (i, o) in out.iter_mut().enumerate().take(hi).skip(lo) {
                *o += self.entries[(i, j)] * xj;
            }
        }
        out
    }

    /// Writes the matrix row-major as CSV at full precision.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for row in self.entries.row_iter() {
            let line: Vec<String> = row.iter().map(|x| format!("{x:e}")).collect();
            writeln!(w, "{}", line.join(","))?;
        }
        Ok(())
    }
}

/// Builds the ISI matrix for a block of `n` symbols with amplitude `sqrt(tau Es)`.
pub fn build_isi_matrix(source: TapSource<'_>, n: usize, tau: f64, es: f64) -> Result<IsiMatrix> {
    crate::pulse::check_tau(tau)?;
    if !(es > 0.0) {
        return Err(Error::Invalid(format!("symbol energy must be positive, got {es}")));
    }
    let amp = amplitude(tau, es);
    match source {
        TapSource::Gram(taps) => IsiMatrix::gram(taps, n, amp),
        TapSource::Convolution(f) => IsiMatrix::convolution(f, n, amp),
    }
}

/// Writes `lag,g,v` rows for inspection.
pub fn write_taps_csv<W: Write>(mut w: W, taps: &IsiTaps, factor: &WhitenedTaps) -> std::io::Result<()> {
    writeln!(w, "lag,g,v")?;
    let n = taps.len().max(factor.len());
    for k in 0..n {
        let v = factor.v.get(k).map(|x| format!("{x:e}")).unwrap_or_default();
        writeln!(w, "{k},{:e},{v}", taps.get(k as isize))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pulse::PulseConfig;

    fn taps(g: &[f64], tau: f64) -> IsiTaps {
        IsiTaps::from_one_sided(g.to_vec(), tau, 0.3).unwrap()
    }

    #[test]
    fn identity_factor() {
        let f = spectral_factorize(&taps(&[1.0], 1.0)).unwrap();
        assert_eq!(f.v, vec![1.0]);
        assert_eq!(f.residual, 0.0);
    }

    #[test]
    fn triangle_factor() {
        let f = spectral_factorize(&taps(&[1.0, 0.5], 0.9)).unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert!((f.v[0] - h).abs() < 1e-7, "{:?}", f.v);
        assert!((f.v[1] - h).abs() < 1e-7);
        assert!(f.residual < 1e-12);
        assert!(f.is_minimum_phase());
    }

    #[test]
    fn ftn_factor_reconstructs() {
        let t = isi_taps(&PulseConfig::new(0.3), 0.8).unwrap();
        let f = spectral_factorize(&t).unwrap();
        // independent check by direct convolution with the reversal
        let rev: Vec<f64> = f.v.iter().rev().copied().collect();
        let full = poly::convolve(&f.v, &rev);
        let mid = f.v.len() - 1;
        for k in 0..t.len() {
            assert!((full[mid + k] - t.get(k as isize)).abs() < 1e-6);
        }
        assert!(f.residual < 1e-6);
        assert!(f.max_root_modulus.unwrap() <= 1.0 + 1e-8);
        assert!(f.step_down_stable);
        assert!(f.v[0] > 0.0);
    }

    #[test]
    fn null_band_rejects_strict_factor() {
        let t = isi_taps(&PulseConfig::new(0.3), 0.7).unwrap();
        match spectral_factorize(&t) {
            Err(Error::NegativeSpectrum { min_spectrum, .. }) => assert!(min_spectrum < 0.0),
            other => panic!("expected negative spectrum, got {other:?}"),
        }
        let loaded = spectral_factorize_loaded(&t);
        assert!(loaded.loading > 0.0);
        assert!(loaded.residual <= loaded.loading * 1.01 + 1e-9);
        assert!(loaded.is_minimum_phase());
    }

    #[test]
    fn loaded_matches_strict_when_positive() {
        let t = isi_taps(&PulseConfig::new(0.3), 0.9).unwrap();
        let a = spectral_factorize(&t).unwrap();
        let b = spectral_factorize_loaded(&t);
        assert_eq!(b.loading, 0.0);
        for (x, y) in a.v.iter().zip(&b.v) {
            assert!((x - y).abs() < 1e-8);
        }
    }

    #[test]
    fn convolution_identity_at_nyquist() {
        let t = isi_taps(&PulseConfig::new(0.3), 1.0).unwrap();
        let f = spectral_factorize(&t).unwrap();
        let g = build_isi_matrix(TapSource::Convolution(&f), 4, 1.0, 1.0).unwrap();
        assert_eq!(g.entries(), &DMatrix::<f64>::identity(4, 4));
    }

    #[test]
    fn gram_diagonal_carries_amplitude() {
        let t = isi_taps(&PulseConfig::new(0.3), 0.8).unwrap();
        let g = build_isi_matrix(TapSource::Gram(&t), 3, 0.8, 1.0).unwrap();
        for i in 0..3 {
            assert!((g.get(i, i) - 0.8).abs() < 1e-15);
            for j in 0..3 {
                assert_eq!(g.get(i, j), g.get(j, i));
            }
        }
        assert!((g.get(1, 0) - 0.8 * t.get(1)).abs() < 1e-15);
    }

    #[test]
    fn convolution_is_banded_lower_triangular() {
        let t = isi_taps(&PulseConfig::new(0.3), 0.8).unwrap();
        let f = spectral_factorize(&t).unwrap();
        let n = 60;
        let g = build_isi_matrix(TapSource::Convolution(&f), n, 0.8, 1.0).unwrap();
        let l = f.len();
        for i in 0..n {
            for j in 0..n {
                let d = i as isize - j as isize;
                if d < 0 || d >= l as isize {
                    assert_eq!(g.get(i, j), 0.0);
                } else {
                    assert_eq!(g.get(i, j), g.amp() * f.v[d as usize]);
                }
            }
        }
        assert_eq!(g.bandwidth(), l);
    }

    #[test]
    fn whitening_consistency_in_interior() {
        let t = isi_taps(&PulseConfig::new(0.3), 0.8).unwrap();
        let f = spectral_factorize(&t).unwrap();
        let n = 80;
        let v = build_isi_matrix(TapSource::Convolution(&f), n, 1.0, 1.0).unwrap();
        let gram = build_isi_matrix(TapSource::Gram(&t), n, 1.0, 1.0).unwrap();
        let vtv = v.entries().transpose() * v.entries();
        let l = f.len();
        for i in 0..n - l {
            for j in 0..n - l {
                assert!((vtv[(i, j)] - gram.get(i, j)).abs() < 1e-4);
            }
        }
    }

    #[test]
    fn apply_matches_dense_product() {
        let t = isi_taps(&PulseConfig::new(0.3), 0.8).unwrap();
        let f = spectral_factorize(&t).unwrap();
        let g = build_isi_matrix(TapSource::Convolution(&f), 30, 0.8, 1.0).unwrap();
        let x: Vec<f64> = (0..30).map(|i| if i % 3 == 0 { 1.0 } else { -1.0 }).collect();
        let dense = g.entries() * nalgebra::DVector::from_vec(x.clone());
        for (a, b) in g.apply(&x).iter().zip(dense.iter()) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn rejects_empty_block() {
        let t = isi_taps(&PulseConfig::new(0.3), 0.8).unwrap();
        assert_eq!(
            build_isi_matrix(TapSource::Gram(&t), 0, 0.8, 1.0),
            Err(Error::EmptyBlock)
        );
    }

    #[test]
    fn whiten_grows_support_below_critical_tau() {
        let w = whiten(&PulseConfig::new(0.3), 0.7, RESIDUAL_BOUND).unwrap();
        assert!(w.factor.residual < RESIDUAL_BOUND);
        assert!(w.taps.len() > 41);
        assert!(w.factor.is_minimum_phase());
    }
}
