// Calibrated margins as the tap support L varies, through the truncation
// threshold and the half-span cap.

use ftnpda::pulse::{isi_taps, PulseConfig};
use ftnpda::separability::{margin_report_for, MarginSettings};

pub fn run_example() -> ftnpda::Result<()> {
    let taus = [0.6, 0.7, 0.8, 0.9];
    println!("threshold  half_span  tau    L   delta_max  delta_ave  gauss_max@4dB  gauss_ave@4dB");
    for (threshold, span) in [(1e-2, 40), (1e-3, 40), (1e-4, 10), (1e-4, 20), (1e-4, 40), (1e-6, 80)] {
        let mut settings = MarginSettings::calibrated(0.3);
        settings.pulse = PulseConfig::new(0.3).with_truncation(threshold, span);
        for tau in taus {
            let l = isi_taps(&settings.pulse, tau)?.len();
            let r = margin_report_for(&settings, tau, &[4.0], 100)?;
            let g = &r.gaussian[0];
            println!(
                "{threshold:9.0e}  {span:9}  {tau:.1}  {l:3}  {:9.4}  {:9.4}  {:13.4}  {:13.4}",
                r.delta_max, r.delta_ave, g.max, g.ave
            );
        }
    }
    Ok(())
}

fn main() -> ftnpda::Result<()> {
    run_example()
}
