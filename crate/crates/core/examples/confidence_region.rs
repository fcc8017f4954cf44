// Freezing confident symbols: update counts and errors of PDA with and
// without a confidence region, on the same blocks.

use ftnpda::detect::Detector;
use ftnpda::sim::{ber_sweep, StopRule, SweepConfig};

pub fn run_example() -> ftnpda::Result<()> {
    let mut cfg = SweepConfig::new(0.3, 0.8, 32, vec![4.0, 6.0, 8.0]);
    cfg.stop = StopRule::blocks(200);
    let detectors = [Detector::pda(), Detector::modified_pda(0.4)];
    for p in ber_sweep(&cfg, &detectors)? {
        println!(
            "{:>12} {} dB: {:>4} errors, {:>6.1} updates/block",
            p.detector, p.ebn0_db, p.bit_errors, p.update_count_mean
        );
    }
    Ok(())
}

fn main() -> ftnpda::Result<()> {
    run_example()
}
