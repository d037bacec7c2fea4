//! Sampling heavy-tailed populations and evaluating their Laplace transforms.

use sscm::{derive_stream, Distribution};

pub fn run_example() -> sscm::Result<()> {
    let mut rng = derive_stream(1, 0);
    for dist in [
        Distribution::gaussian(),
        Distribution::student_t(4.5)?,
        Distribution::pareto(6.0, 1.0)?.with_standardized(true)?,
        Distribution::student_t(0.5)?,
    ] {
        let z = dist.sample(100_000, &mut rng);
        let big = z.iter().filter(|v| v.abs() > 10.0).count();
        println!(
            "{:>8} alpha={:<5} tau={:<10} P(|Z|>10)~{:.5}  phi(0.1)={:.6}",
            dist.kind().to_string(),
            dist.alpha(),
            dist.tau().map_or("inf".to_string(), |t| format!("{t:.4}")),
            big as f64 / z.len() as f64,
            dist.laplace(0.1)?,
        );
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> sscm::Result<()> {
    run_example()
}
