use crate::error::{Error, Result};
use crate::isi::{Domain, IsiMatrix};
use crate::pulse::check_tau;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

/// Energy-per-bit convention for BPSK at time packing `tau`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EbPolicy {
    /// `Eb = tau Es`, the energy of the `sqrt(tau Es)`-scaled symbol.
    #[default]
    TauEs,
    /// `Eb = Es` regardless of packing.
    Es,
}

impl EbPolicy {
    pub fn as_str(&self) -> &'static str {
        match self {
            EbPolicy::TauEs => "tau_es",
            EbPolicy::Es => "es",
        }
    }

    pub fn energy_per_bit(&self, tau: f64, es: f64) -> f64 {
        match self {
            EbPolicy::TauEs => tau * es,
            EbPolicy::Es => es,
        }
    }
}

/// Noise variance per real dimension, `N0 / 2` with `N0 = Eb / 10^(x/10)`,
/// under the default [`EbPolicy`].
pub fn ebn0_to_sigma2(ebn0_db: f64, tau: f64, es: f64) -> f64 {
    ebn0_to_sigma2_with(EbPolicy::default(), ebn0_db, tau, es)
}

pub fn ebn0_to_sigma2_with(policy: EbPolicy, ebn0_db: f64, tau: f64, es: f64) -> f64 {
    let n0 = policy.energy_per_bit(tau, es) / 10f64.powf(ebn0_db / 10.0);
    n0 / 2.0
}

/// One operating point of the whitened-domain channel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelConfig {
    pub ebn0_db: f64,
    pub es: f64,
    pub tau: f64,
    pub beta: f64,
    pub n: usize,
    pub seed: u64,
    pub eb_policy: EbPolicy,
}

impl ChannelConfig {
    pub fn new(tau: f64, beta: f64, n: usize, ebn0_db: f64, seed: u64) -> Self {
        Self {
            ebn0_db,
            es: 1.0,
            tau,
            beta,
            n,
            seed,
            eb_policy: EbPolicy::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_tau(self.tau)?;
        if self.n < 1 {
            return Err(Error::EmptyBlock);
        }
        if !(self.es > 0.0) {
            return Err(Error::Invalid(format!("symbol energy must be positive, got {}", self.es)));
        }
        Ok(())
    }

    pub fn sigma2(&self) -> f64 {
        ebn0_to_sigma2_with(self.eb_policy, self.ebn0_db, self.tau, self.es)
    }
}

/// Generator for block `index` of a run: the ChaCha stream number is the
/// block index, so every block is reproducible on its own.
pub fn block_rng(seed: u64, index: u64) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Uniform BPSK symbols followed by unit-variance noise samples.
pub fn draw_block<R: Rng + ?Sized>(n: usize, rng: &mut R) -> (Vec<f64>, Vec<f64>) {
    let a = (0..n)
        .map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 })
        .collect();
    let z = (0..n).map(|_| rng.sample(StandardNormal)).collect();
    (a, z)
}

/// `y = G a + sigma z` for prepared symbols and unit noise.
pub fn observe(g: &IsiMatrix, a: &[f64], z: &[f64], sigma2: f64) -> Vec<f64> {
    let sigma = sigma2.sqrt();
    g.apply(a)
        .into_iter()
        .zip(z)
        .map(|(s, z)| s + sigma * z)
        .collect()
}

/// Draws one block and its observation through the convolution-domain
/// channel `g`.
pub fn simulate_block<R: Rng + ?Sized>(
    config: &ChannelConfig,
    g: &IsiMatrix,
    rng: &mut R,
) -> Result<(Vec<f64>, Vec<f64>)> {
    config.validate()?;
    if g.domain() != Domain::Convolution {
        return Err(Error::WrongDomain("the channel is simulated in the convolution domain"));
    }
    if g.n() != config.n {
        return Err(Error::DimensionMismatch {
            expected: config.n,
            got: g.n(),
        });
    }
    let (a, z) = draw_block(config.n, rng);
    let y = observe(g, &a, &z, config.sigma2());
    Ok((a, y))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::isi::{build_isi_matrix, channel_factor, TapSource};
    use crate::pulse::{isi_taps, PulseConfig};

    fn channel(tau: f64, n: usize) -> IsiMatrix {
        let taps = isi_taps(&PulseConfig::new(0.3), tau).unwrap();
        build_isi_matrix(TapSource::Convolution(&channel_factor(&taps)), n, tau, 1.0).unwrap()
    }

    #[test]
    fn sigma2_conventions() {
        assert!((ebn0_to_sigma2(0.0, 1.0, 1.0) - 0.5).abs() < 1e-15);
        assert!((ebn0_to_sigma2(10.0 * 2f64.log10(), 1.0, 1.0) - 0.25).abs() < 1e-15);
        assert!((ebn0_to_sigma2(0.0, 0.8, 1.0) - 0.4).abs() < 1e-15);
        assert!((ebn0_to_sigma2_with(EbPolicy::Es, 0.0, 0.8, 1.0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn noiseless_block_is_exact() {
        let g = channel(0.8, 16);
        let (a, z) = draw_block(16, &mut block_rng(1, 0));
        assert_eq!(observe(&g, &a, &z, 0.0), g.apply(&a));
    }

    #[test]
    fn nyquist_block_adds_noise_per_symbol() {
        let g = channel(1.0, 8);
        let cfg = ChannelConfig::new(1.0, 0.3, 8, 3.0, 7);
        let (a, y) = simulate_block(&cfg, &g, &mut block_rng(7, 3)).unwrap();
        let (a2, z) = draw_block(8, &mut block_rng(7, 3));
        assert_eq!(a, a2);
        let s = cfg.sigma2().sqrt();
        for k in 0..8 {
            assert!((y[k] - (a[k] + s * z[k])).abs() < 1e-15);
        }
    }

    #[test]
    fn blocks_are_independent_streams() {
        let (a0, z0) = draw_block(32, &mut block_rng(5, 0));
        let (a1, z1) = draw_block(32, &mut block_rng(5, 1));
        assert_ne!(z0, z1);
        let (b0, w0) = draw_block(32, &mut block_rng(5, 0));
        assert_eq!((a0, z0), (b0, w0));
        assert_eq!(a1.len(), 32);
    }

    #[test]
    fn rejects_mismatched_channel() {
        let g = channel(0.8, 8);
        let cfg = ChannelConfig::new(0.8, 0.3, 9, 3.0, 0);
        assert!(simulate_block(&cfg, &g, &mut block_rng(0, 0)).is_err());
    }
}
