//! Kolmogorov distance between the spectrum of B and its limit as p grows.

use sscm::matrix_model::two_atom_sigma;
use sscm::mp_law::{density_cdf, GridSpec};
use sscm::spectra::{kolmogorov_distance, median, simulate_esds};
use sscm::Distribution;

pub fn run_example() -> sscm::Result<()> {
    for p in [50, 100, 200] {
        let cov = two_atom_sigma(p)?;
        let h = cov.spectral_dist();
        let law = density_cdf(0.5, &h, GridSpec::default_for(0.5, &h))?;
        let mut line = format!("p = {p:>3}:");
        for alpha in [0.5, 3.0] {
            let esds = simulate_esds(2 * p, &cov, &Distribution::student_t(alpha)?, 5, 5)?;
            let d: Vec<f64> = esds
                .iter()
                .map(|e| kolmogorov_distance(e, &law, f64::INFINITY))
                .collect::<sscm::Result<_>>()?;
            line += &format!("  alpha {alpha}: {:.4}", median(&d));
        }
        println!("{line}");
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> sscm::Result<()> {
    run_example()
}
