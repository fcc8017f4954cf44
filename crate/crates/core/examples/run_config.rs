// Driving a whole experiment from a TOML config, as the command-line tool
// does, with artifacts and manifest in a scratch directory.

use ftnpda::config::RunConfig;
use ftnpda::run::run;

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let dir = std::env::temp_dir().join(format!("ftnlab-example-{}", std::process::id()));
    let text = format!(
        r#"
        command = "factorize"
        [model]
        tau = [0.7, 0.8]
        [output]
        directory = {:?}
        "#,
        dir.display().to_string()
    );
    let cfg = RunConfig::from_toml(&text)?;
    let status = run(&cfg)?;
    println!("exit code {}", status.code());
    println!("{}", std::fs::read_to_string(dir.join("manifest.json"))?);
    std::fs::remove_dir_all(&dir)?;
    Ok(())
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
