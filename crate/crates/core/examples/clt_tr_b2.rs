//! Fluctuations of tr(B^2) around tr(S~^2) + p^2/n.

use sscm::clt::{clt_experiment, clt_mean_var};
use sscm::matrix_model::two_atom_sigma;
use sscm::{CovModel, Distribution};

pub fn run_example() -> sscm::Result<()> {
    let (mu, s2) = clt_mean_var(&two_atom_sigma(2)?.spectral_dist(), 1.0, 15.0)?;
    println!("two-atom, y = 1, tau = 15: limit N({mu:.2}, {s2:.4})");

    let r = clt_experiment(200, &Distribution::gaussian(), &CovModel::identity(100)?, 200, 1)?;
    println!(
        "gaussian n = 200, p = 100: mean {:.3} (limit {:.3}), var {:.3} (limit {:.3}), KS {:.3} pass {}",
        r.sample_mean, r.mu, r.sample_var, r.sigma2, r.ks_stat, r.ks_pass
    );
    Ok(())
}

#[allow(dead_code)]
fn main() -> sscm::Result<()> {
    run_example()
}
