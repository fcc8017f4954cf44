// One block through the tau = 0.8 channel, detected by PDA, the successive
// baseline and exhaustive MLSE.

use ftnpda::detect::{mlse_bruteforce, pda_detect, successive_baseline, DEFAULT_SWEEPS};
use ftnpda::sim::{block_rng, simulate_block, ChannelConfig, SweepConfig};

fn signs(a: &[f64]) -> String {
    a.iter().map(|x| if *x > 0.0 { '+' } else { '-' }).collect()
}

pub fn run_example() -> ftnpda::Result<()> {
    let (tau, n, ebn0) = (0.8, 12, 5.0);
    let g = SweepConfig::new(0.3, tau, n, vec![]).channel()?;
    let channel = ChannelConfig::new(tau, 0.3, n, ebn0, 11);
    let sigma2 = channel.sigma2();
    let (a, y) = simulate_block(&channel, &g, &mut block_rng(channel.seed, 0))?;

    let pda = pda_detect(&y, &g, sigma2, DEFAULT_SWEEPS)?;
    println!("sent       {}", signs(&a));
    println!("pda        {}", signs(&pda.hard));
    println!("successive {}", signs(&successive_baseline(&y, &g)?));
    println!("mlse       {}", signs(&mlse_bruteforce(&y, &g)?));
    println!("updates {} over {} sweeps", pda.update_count, pda.sweeps);
    for (k, (p, l)) in pda.posteriors.iter().zip(&pda.llr).enumerate() {
        println!("  a[{k:>2}] P(+1) = {p:.4}  llr = {l:+.2}");
    }
    Ok(())
}

fn main() -> ftnpda::Result<()> {
    run_example()
}
