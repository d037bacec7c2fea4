//! Running an experiment from a configuration, as the `sscm` tool does.

use sscm::experiments::{run_with_workers, ExperimentConfig, Subcommand};

pub fn run_example() -> sscm::Result<()> {
    let dir = tempfile::tempdir()?;
    let mut config = ExperimentConfig::new(Subcommand::KsCurve);
    config.p = vec![40, 80];
    config.alpha = vec![1.0, 3.0];
    config.y = Some(0.5);
    config.reps = 4;
    config.out = dir.path().to_path_buf();
    let result = run_with_workers(&config, Some(2))?;
    for f in &result.files {
        println!("wrote {}", f.file_name().unwrap_or_default().to_string_lossy());
    }
    for (k, v) in &result.metrics {
        println!("{k} = {v:.4}");
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> sscm::Result<()> {
    run_example()
}
