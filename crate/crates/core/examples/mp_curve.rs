//! Limiting spectral density of B for the two-atom population.

use num_complex::Complex64;
use sscm::matrix_model::two_atom_sigma;
use sscm::mp_law::{density_cdf, solve_m, GridSpec};

pub fn run_example() -> sscm::Result<()> {
    let h = two_atom_sigma(2)?.spectral_dist();
    let m = solve_m(Complex64::new(1.0, 0.01), 0.5, &h)?;
    println!("m(1 + 0.01i) = {m:.8}");

    for y in [0.5, 2.0] {
        let law = density_cdf(y, &h, GridSpec::default_for(y, &h))?;
        let peak = law
            .grid
            .iter()
            .zip(&law.density)
            .max_by(|a, b| a.1.total_cmp(b.1))
            .expect("non-empty grid");
        println!(
            "y = {y}: zero atom {:.3}, density peak {:.4} at x = {:.3}, max residual {:.1e}",
            law.zero_atom, peak.1, peak.0, law.max_residual
        );
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> sscm::Result<()> {
    run_example()
}
