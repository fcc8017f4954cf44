// Paired BER sweep at tau = 0.7 with the analytic Nyquist curve for
// reference, written as CSV.

use ftnpda::detect::Detector;
use ftnpda::sim::{ber_sweep, bpsk_ber, spectral_efficiency, write_ber_csv, StopRule, SweepConfig};

pub fn run_example() -> ftnpda::Result<()> {
    let mut cfg = SweepConfig::new(0.3, 0.7, 32, vec![2.0, 4.0, 6.0, 8.0]);
    cfg.stop = StopRule {
        min_errors: 50,
        max_blocks: 300,
    };
    println!("SE = {:.2} bits/s/Hz", spectral_efficiency(0.3, 0.7, 2)?);
    let points = ber_sweep(&cfg, &[Detector::pda(), Detector::Successive])?;
    write_ber_csv(std::io::stdout().lock(), &points).expect("stdout");
    for x in &cfg.ebn0_db {
        println!("nyquist {x} dB: {:.3e}", bpsk_ber(*x));
    }
    Ok(())
}

fn main() -> ftnpda::Result<()> {
    run_example()
}
