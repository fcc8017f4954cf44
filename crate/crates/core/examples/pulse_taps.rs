// Raised-cosine ISI taps at FTN spacing and how much interference each
// packing factor introduces.

use ftnpda::pulse::{isi_taps, rc_value, PulseConfig};

pub fn run_example() -> ftnpda::Result<()> {
    let cfg = PulseConfig::new(0.3);
    println!("g(0.5) = {:.4}", rc_value(0.5, cfg.beta));
    println!("{:>5} {:>4} {:>9} {:>9} {:>9}", "tau", "L", "g[1]", "g[2]", "isi");
    for tau in [0.6, 0.7, 0.8, 0.9, 1.0] {
        let taps = isi_taps(&cfg, tau)?;
        println!(
            "{tau:>5} {:>4} {:>9.5} {:>9.5} {:>9.4}",
            taps.len(),
            taps.get(1),
            taps.get(2),
            taps.isi_mass()
        );
    }
    Ok(())
}

fn main() -> ftnpda::Result<()> {
    run_example()
}
