// Minimum-phase whitening filters. Above the critical packing the taps
// factor exactly; below it the folded spectrum has a null band and the
// support grows until a loaded factor meets the residual bound.

use ftnpda::isi::{min_spectrum, spectral_factorize, whiten, RESIDUAL_BOUND};
use ftnpda::pulse::{isi_taps, PulseConfig};

pub fn run_example() -> ftnpda::Result<()> {
    let cfg = PulseConfig::new(0.3);
    for tau in [0.6, 0.7, 0.8, 0.9] {
        let taps = isi_taps(&cfg, tau)?;
        let strict = match spectral_factorize(&taps) {
            Ok(f) => format!("strict residual {:.1e}", f.residual),
            Err(e) => format!("strict rejected ({e})"),
        };
        let w = whiten(&cfg, tau, RESIDUAL_BOUND)?;
        println!(
            "tau={tau}: min spectrum {:+.2e}; {strict}; used L={} {:?} residual {:.1e} loading {:.1e} min-phase {}",
            min_spectrum(&taps),
            w.factor.len(),
            w.factor.method,
            w.factor.residual,
            w.factor.loading,
            w.factor.is_minimum_phase()
        );
    }
    Ok(())
}

fn main() -> ftnpda::Result<()> {
    run_example()
}
