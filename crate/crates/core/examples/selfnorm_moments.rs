//! Moments of Y = Z/|Z| computed twice: Monte Carlo and the Laplace-transform
//! integral.

use sscm::selfnorm::{integral_moment, mc_moment, MomentSpec};
use sscm::{derive_stream, Distribution};

pub fn run_example() -> sscm::Result<()> {
    let dist = Distribution::student_t(5.0)?;
    let mut rng = derive_stream(2, 0);
    for exps in [vec![2], vec![4], vec![2, 2]] {
        let spec = MomentSpec::new(exps.clone(), 64)?;
        let exact = integral_moment(&dist, &spec)?;
        let mc = mc_moment(&dist, &spec, 20_000, &mut rng)?;
        println!(
            "E Y^{:?}: integral {:.6e}  monte carlo {:.6e} +- {:.1e}",
            exps, exact.value, mc.value, mc.stderr
        );
    }
    // p^2 E Y1^2 Y2^2 approaches 1 as p grows.
    for p in [16, 256, 4096] {
        let v = integral_moment(&dist, &MomentSpec::new(vec![2, 2], p)?)?.value;
        println!("p = {p:>5}: p^2 E Y1^2 Y2^2 = {:.5}", v * (p * p) as f64);
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> sscm::Result<()> {
    run_example()
}
