// The acceptance suite, one line per criterion with its wall time.

use ftnpda::validate::{self, Options, Outcome};
use std::time::Instant;

type Criterion = Box<dyn Fn() -> ftnpda::Result<Outcome>>;

pub fn run_example() -> ftnpda::Result<()> {
    let opts = Options::default();
    let criteria: Vec<Criterion> = vec![
        Box::new(validate::table_one),
        Box::new(validate::table_two),
        Box::new(validate::gaussian_dominance),
        Box::new(move || validate::nyquist_sanity(&opts)),
        Box::new(move || validate::oracle_equivalence(&opts)),
        Box::new(move || validate::modified_pda_savings(&opts)),
        Box::new(validate::factorization_quality),
        Box::new(move || validate::bayes_exactness(&opts)),
        Box::new(move || validate::complexity_envelope(&opts)),
    ];
    for run in criteria {
        let start = Instant::now();
        let outcome = run()?;
        println!("{outcome} ({:.1} s)", start.elapsed().as_secs_f64());
    }
    Ok(())
}

fn main() -> ftnpda::Result<()> {
    run_example()
}
