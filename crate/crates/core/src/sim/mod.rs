//! BPSK source, whitened-domain AWGN channel and the Monte Carlo BER harness.

mod channel;
mod harness;

pub use channel::{
    block_rng, draw_block, ebn0_to_sigma2, ebn0_to_sigma2_with, observe, simulate_block,
    ChannelConfig, EbPolicy,
};
pub use harness::{
    ber_sweep, ber_sweep_with_channel, binomial_std_error, export_llrs, write_ber_csv, BerPoint,
    StopRule, SweepConfig, BER_CSV_HEADER,
};

use crate::error::{Error, Result};
use statrs::function::erf::erfc;

/// Gaussian tail probability `Q(x) = P(Z > x)`.
pub fn q_function(x: f64) -> f64 {
    0.5 * erfc(x / std::f64::consts::SQRT_2)
}

/// Uncoded BPSK bit error rate over AWGN, `Q(sqrt(2 Eb/N0))`.
pub fn bpsk_ber(ebn0_db: f64) -> f64 {
    q_function((2.0 * 10f64.powf(ebn0_db / 10.0)).sqrt())
}

/// `log2(M) / ((1 + beta) tau)` in bits/s/Hz.
pub fn spectral_efficiency(beta: f64, tau: f64, constellation_size: u32) -> Result<f64> {
    if constellation_size < 2 {
        return Err(Error::Invalid(format!(
            "constellation size must be at least 2, got {constellation_size}"
        )));
    }
    crate::pulse::check_tau(tau)?;
    Ok((constellation_size as f64).log2() / ((1.0 + beta) * tau))
}

#[cfg(test)]
mod tests {
    use super::*;

    /// `Q(x)` by composite Simpson integration of the Gaussian density.
    fn q_by_quadrature(x: f64) -> f64 {
        let upper = x + 40.0;
        let steps = 200_000;
        let h = (upper - x) / steps as f64;
        let pdf = |t: f64| (-t * t / 2.0).exp() / (2.0 * std::f64::consts::PI).sqrt();
        let mut s = pdf(x) + pdf(upper);
        for i in 1..steps {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            s += w * pdf(x + i as f64 * h);
        }
        s * h / 3.0
    }

    #[test]
    fn q_function_matches_quadrature() {
        for x in [0.0, 0.5, 1.0, 2.0, 2.5, 3.5] {
            let q = q_function(x);
            let oracle = q_by_quadrature(x);
            assert!(((q - oracle) / oracle).abs() < 1e-9, "x={x}: {q} vs {oracle}");
        }
        assert_eq!(q_function(0.0), 0.5);
    }

    #[test]
    fn bpsk_reference_point() {
        assert!((bpsk_ber(4.0) - 1.25e-2).abs() < 1e-4);
    }

    #[test]
    fn spectral_efficiency_values() {
        assert!((spectral_efficiency(0.3, 0.8, 2).unwrap() - 0.9615).abs() < 1e-4);
        assert!((spectral_efficiency(0.3, 0.7, 2).unwrap() - 1.0989).abs() < 1e-4);
        assert_eq!(spectral_efficiency(0.0, 1.0, 2).unwrap(), 1.0);
        assert!(spectral_efficiency(0.3, 0.8, 1).is_err());
    }
}
