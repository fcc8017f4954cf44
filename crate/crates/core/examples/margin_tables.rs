// Linear and Gaussian separability margins over the FTN operating region,
// in every matrix domain and SNR convention.

use ftnpda::separability::margin_report;

pub fn run_example() -> ftnpda::Result<()> {
    let taus = [0.6, 0.7, 0.8, 0.9];
    let snrs = [0.0, 2.0, 4.0, 6.0, 8.0];
    let table = margin_report(0.3, &taus, &snrs, 100)?;
    print!("{}", table.to_text());
    Ok(())
}

fn main() -> ftnpda::Result<()> {
    run_example()
}
