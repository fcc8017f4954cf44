// Soft output for an external decoder: one row of PDA log-likelihood
// ratios per block.

use ftnpda::detect::{write_llr_csv, Detector};
use ftnpda::sim::{export_llrs, SweepConfig};

pub fn run_example() -> ftnpda::Result<()> {
    let cfg = SweepConfig::new(0.3, 0.8, 16, vec![]);
    let llr = export_llrs(&cfg, &Detector::pda(), 4.0, 4)?;
    write_llr_csv(std::io::stdout().lock(), &llr).expect("stdout");
    Ok(())
}

fn main() -> ftnpda::Result<()> {
    run_example()
}
