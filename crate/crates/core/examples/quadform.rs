//! Variance of Y'AY against the fourth-moment formula.

use sscm::selfnorm::{quadform_stats, random_symmetric, theoretical_cov};
use sscm::{derive_stream, Distribution};

pub fn run_example() -> sscm::Result<()> {
    let p = 64;
    let a = random_symmetric(p, &mut derive_stream(3, 99));
    for dist in [Distribution::gaussian(), Distribution::student_t(6.0)?] {
        let tau = dist.tau().expect("finite fourth moment");
        let st = quadform_stats(&dist, p, a.as_ref(), a.as_ref(), 5_000, &mut derive_stream(3, 0))?;
        println!(
            "tau = {tau:>4}: var(Y'AY) = {:.4e} +- {:.1e}, formula {:.4e}",
            st.var_a,
            st.var_a_stderr,
            theoretical_cov(a.as_ref(), a.as_ref(), tau, p)
        );
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> sscm::Result<()> {
    run_example()
}
