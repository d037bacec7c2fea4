//! Pooled eigenvalue histograms of B against the limiting density, for a light
//! and a very heavy tail.

use sscm::matrix_model::two_atom_sigma;
use sscm::mp_law::{density_cdf, GridSpec};
use sscm::spectra::{histogram_deviation, histogram_in_range, simulate_esds};
use sscm::Distribution;

pub fn run_example() -> sscm::Result<()> {
    let (n, p) = (200, 100);
    let cov = two_atom_sigma(p)?;
    let h = cov.spectral_dist();
    let y = p as f64 / n as f64;
    let law = density_cdf(y, &h, GridSpec::default_for(y, &h))?;
    for alpha in [0.5, 4.0] {
        let esds = simulate_esds(n, &cov, &Distribution::student_t(alpha)?, 20, 11)?;
        let hist = histogram_in_range(&esds, 30, law.grid[0], law.grid[law.grid.len() - 1])?;
        println!(
            "alpha = {alpha}: sup |histogram - density| = {:.3}",
            histogram_deviation(&hist, &law)
        );
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> sscm::Result<()> {
    run_example()
}
