//! Invariants and asymptotic properties of each module.

use faer::Mat;
use num_complex::Complex64;
use proptest::prelude::*;
use rand::Rng;

use sscm::clt::{clt_experiment, clt_mean_var, trace_of_square};
use sscm::matrix_model::{
    sample_data, sigma_tilde, sign_cov_discrepancy, spatial_sign_cov, two_atom_sigma, CovModel, SpectralDist,
};
use sscm::mp_law::{density_cdf, mp_closed_form_density, residual, GridSpec};
use sscm::selfnorm::{integral_moment, mc_moment, mc_moments, quadform_stats, random_symmetric, self_normalize, MomentSpec};
use sscm::spectra::{eigenvalues_sym, kolmogorov_distance, median, simulate_esd, simulate_esds, EsdMeta, EsdSample};
use sscm::{derive_stream, DistKind, Distribution};

fn trace(m: &Mat<f64>) -> f64 {
    (0..m.nrows()).map(|i| m[(i, i)]).sum()
}

fn standardized_family() -> Vec<Distribution> {
    vec![
        Distribution::gaussian(),
        Distribution::student_t(3.0).unwrap(),
        Distribution::student_t(4.5).unwrap(),
        Distribution::student_t(10.0).unwrap(),
        Distribution::pareto(6.0, 1.0).unwrap().with_standardized(true).unwrap(),
    ]
}

// ---------------------------------------------------------------- heavy tails

#[test]
fn laplace_strictly_decreasing() {
    let all = [
        Distribution::gaussian(),
        Distribution::student_t(0.5).unwrap(),
        Distribution::student_t(2.0).unwrap(),
        Distribution::student_t(4.5).unwrap(),
        Distribution::pareto(1.5, 2.0).unwrap(),
    ];
    let s = [0.0, 1e-4, 1e-2, 0.1, 1.0, 10.0, 100.0];
    for d in &all {
        let v: Vec<f64> = s.iter().map(|&x| d.laplace(x).unwrap()).collect();
        assert_eq!(v[0], 1.0);
        assert!(v.windows(2).all(|w| w[1] < w[0]), "{d:?}: {v:?}");
    }
}

#[test]
fn small_s_slope_is_second_moment() {
    // (1 − φ(s))/s → E Z² = 1; the last point must be within 2% and the
    // sequence must move monotonically toward 1.
    for d in standardized_family() {
        let r: Vec<f64> = [1e-3, 1e-4, 1e-5]
            .iter()
            .map(|&s| d.one_minus_laplace(s).unwrap() / s)
            .collect();
        let gaps: Vec<f64> = r.iter().map(|v| (v - 1.0).abs()).collect();
        assert!(gaps.windows(2).all(|w| w[1] <= w[0] + 1e-9), "{d:?}: {r:?}");
        assert!(gaps[2] < 0.02, "{d:?}: {r:?}");
    }
}

#[test]
fn sampled_odd_moments_vanish() {
    let mut rng = derive_stream(41, 0);
    for d in [
        Distribution::gaussian(),
        Distribution::student_t(4.5).unwrap(),
        Distribution::pareto(9.0, 1.0).unwrap(),
    ] {
        let z = d.sample(1_000_000, &mut rng);
        for k in [1, 3] {
            let vals: Vec<f64> = z.iter().map(|v| v.powi(k)).collect();
            let n = vals.len() as f64;
            let mean = vals.iter().sum::<f64>() / n;
            let sd = (vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
            assert!(mean.abs() < 4.0 * sd / n.sqrt(), "{d:?} k={k}: {mean}");
        }
    }
}

#[test]
fn gaussian_sample_mean() {
    let z = Distribution::gaussian().sample(1_000_000, &mut derive_stream(42, 0));
    assert!((z.iter().sum::<f64>() / 1e6).abs() < 4e-3);
}

#[test]
fn standardized_t_second_and_fourth_moments() {
    let d = Distribution::student_t(4.5).unwrap();
    let z = d.sample(1_000_000, &mut derive_stream(43, 0));
    let m2 = z.iter().map(|v| v * v).sum::<f64>() / z.len() as f64;
    assert!((m2 - 1.0).abs() < 0.01, "{m2}");
    // The fourth moment by quadrature of the density: a sampled fourth moment
    // has infinite variance at this tail index.
    assert!((d.tau().unwrap() - 15.0).abs() < 1e-12);
}

#[test]
fn laplace_and_damped_moment_match_monte_carlo() {
    let d = Distribution::student_t(3.0).unwrap().with_standardized(false).unwrap();
    let z = d.sample(2_000_000, &mut derive_stream(44, 0));
    for (k, s) in [(0u32, 1.0), (4, 0.1)] {
        let vals: Vec<f64> = z.iter().map(|v| v.powi(k as i32) * (-s * v * v).exp()).collect();
        let n = vals.len() as f64;
        let mean = vals.iter().sum::<f64>() / n;
        let se = (vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt() / n.sqrt();
        let exact = d.damped_moment(k, s).unwrap();
        assert!((mean - exact).abs() < 3.0 * se, "k={k}: {mean} vs {exact} (se {se})");
    }
}

// ---------------------------------------------------------------- selfnorm

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn self_normalized_vectors_have_unit_norm(z in prop::collection::vec(-1e6f64..1e6, 1..200)) {
        prop_assume!(z.iter().any(|v| *v != 0.0));
        let y = self_normalize(&z).unwrap();
        let ss: f64 = y.iter().map(|v| v * v).sum();
        prop_assert!((ss - 1.0).abs() < 1e-14);
    }

    #[test]
    fn sampled_vectors_have_unit_norm(seed in any::<u64>(), alpha in 0.3f64..8.0, p in 1usize..300) {
        let d = Distribution::student_t(alpha).unwrap();
        let z = d.sample(p, &mut derive_stream(seed, 0));
        prop_assume!(z.iter().any(|v| *v != 0.0));
        let y = self_normalize(&z).unwrap();
        let ss: f64 = y.iter().map(|v| v * v).sum();
        prop_assert!((ss - 1.0).abs() < 1e-14);
    }
}

#[test]
fn second_moment_is_one_over_p_for_any_tail() {
    for d in [Distribution::student_t(0.5).unwrap(), Distribution::student_t(3.0).unwrap()] {
        let spec = MomentSpec::new(vec![2], 20).unwrap();
        let mc = mc_moment(&d, &spec, 100_000, &mut derive_stream(50, 0)).unwrap();
        assert!((mc.value - 0.05).abs() < 3.0 * mc.stderr, "{mc:?}");
    }
}

#[test]
fn gaussian_fourth_moment_beta_closed_form() {
    let spec = MomentSpec::new(vec![4], 16).unwrap();
    let mc = mc_moment(&Distribution::gaussian(), &spec, 200_000, &mut derive_stream(51, 0)).unwrap();
    assert!((mc.value - 3.0 / 288.0).abs() < 3.0 * mc.stderr, "{mc:?}");
}

#[test]
fn sphere_identity_at_p64() {
    let p = 64;
    let specs = [MomentSpec::new(vec![4], p).unwrap(), MomentSpec::new(vec![2, 2], p).unwrap()];
    let pf = p as f64;
    for d in [Distribution::gaussian(), Distribution::student_t(1.0).unwrap()] {
        let b = mc_moments(&d, &specs, 100_000, &mut derive_stream(52, 0)).unwrap();
        let (v, se) = b.combined(&[pf, pf * (pf - 1.0)]);
        assert!((v - 1.0).abs() < 3.0 * se, "{d:?}: {v} +- {se}");
    }
}

#[test]
fn second_order_scaling_of_even_moments() {
    // p²·E Y₁²Y₂² → 1, within 10% at p = 1024 with a shrinking gap.
    for alpha in [2.0, 4.5] {
        let d = Distribution::student_t(alpha).unwrap();
        let gaps: Vec<f64> = [64, 256, 1024]
            .iter()
            .map(|&p| {
                let v = integral_moment(&d, &MomentSpec::new(vec![2, 2], p).unwrap()).unwrap().value;
                (v * (p * p) as f64 - 1.0).abs()
            })
            .collect();
        println!("alpha {alpha}: |p^2 E Y1^2 Y2^2 - 1| at p = 64, 256, 1024: {gaps:?}");
        assert!(gaps.windows(2).all(|w| w[1] < w[0]), "alpha {alpha}: {gaps:?}");
        assert!(gaps[2] < 0.10, "alpha {alpha}: gap {} at p = 1024", gaps[2]);
    }
}

#[test]
fn fourth_moment_vanishes_on_the_one_over_p_scale() {
    for alpha in [2.0, 4.5] {
        let d = Distribution::student_t(alpha).unwrap();
        let v: Vec<f64> = [64, 256, 1024]
            .iter()
            .map(|&p| integral_moment(&d, &MomentSpec::new(vec![4], p).unwrap()).unwrap().value * p as f64)
            .collect();
        assert!(v.windows(2).all(|w| w[1] < w[0]), "alpha {alpha}: {v:?}");
    }
}

#[test]
fn fourth_moment_refinement_matches_kurtosis() {
    // p²·E Y₁⁴ → τ = 15 for the standardized t with 4.5 degrees of freedom.
    let d = Distribution::student_t(4.5).unwrap();
    let v = integral_moment(&d, &MomentSpec::new(vec![4], 1024).unwrap()).unwrap().value * 1024.0 * 1024.0;
    println!("p^2 E Y1^4 at p = 1024: {v} (tau = 15)");
    assert!((v - 15.0).abs() < 0.15 * 15.0, "{v}");
}

#[test]
fn odd_cross_moment_is_small() {
    for p in [64usize, 256] {
        let spec = MomentSpec::new(vec![1, 1], p).unwrap();
        let mc = mc_moment(&Distribution::student_t(3.0).unwrap(), &spec, 200_000, &mut derive_stream(53, p as u64)).unwrap();
        assert!(mc.value.abs() < 5.0 * mc.stderr, "p={p}: {mc:?}");
    }
}

#[test]
fn quadratic_form_mean_is_trace_over_p() {
    let p = 48;
    let a = random_symmetric(p, &mut derive_stream(54, 1));
    let tr = (0..p).map(|i| a[(i, i)]).sum::<f64>() / p as f64;
    for d in [Distribution::gaussian(), Distribution::student_t(1.5).unwrap()] {
        let st = quadform_stats(&d, p, a.as_ref(), a.as_ref(), 20_000, &mut derive_stream(54, 0)).unwrap();
        assert!((st.mean_a - tr).abs() <= 3.0 * st.mean_a_stderr, "{st:?} vs {tr}");
    }
}

#[test]
fn alternating_sign_quadform_gaussian() {
    let p = 128;
    let a = Mat::from_fn(p, p, |i, j| if i == j { if i % 2 == 0 { 1.0 } else { -1.0 } } else { 0.0 });
    let st = quadform_stats(&Distribution::gaussian(), p, a.as_ref(), a.as_ref(), 5_000, &mut derive_stream(55, 0)).unwrap();
    let theory = 2.0 / (p * p) as f64 * p as f64;
    assert!((st.cov_ab - theory).abs() < 3.0 * st.cov_ab_stderr, "{st:?} vs {theory}");
}

// ---------------------------------------------------------------- matrix model

fn random_data(n: usize, p: usize, seed: u64) -> Mat<f64> {
    sample_data(n, &CovModel::identity(p).unwrap(), &Distribution::student_t(1.0).unwrap(), &mut derive_stream(seed, 0))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn sign_cov_trace_psd_and_scale_invariance(seed in any::<u64>(), n in 1usize..40, p in 1usize..40) {
        let x = random_data(n, p, seed);
        let b = spatial_sign_cov(x.as_ref()).unwrap();
        prop_assert!((trace(&b) - p as f64).abs() <= 1e-10 * p as f64);
        let ev = eigenvalues_sym(b.as_ref()).unwrap();
        prop_assert!(ev[0] >= -1e-10 * p as f64);
        let mut rng = derive_stream(seed, 1);
        let scales: Vec<f64> = (0..n).map(|_| (rng.random::<f64>() * 40.0 - 20.0).exp()).collect();
        let scaled = Mat::from_fn(n, p, |i, j| x[(i, j)] * scales[i]);
        let b2 = spatial_sign_cov(scaled.as_ref()).unwrap();
        for i in 0..p {
            for j in 0..p {
                prop_assert!((b[(i, j)] - b2[(i, j)]).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn sigma_tilde_keeps_trace(entries in prop::collection::vec(0.2f64..5.0, 2..30), tau in 1.01f64..50.0) {
        let cov = CovModel::diagonal(&entries).unwrap();
        let t = sigma_tilde(&cov, tau).unwrap();
        let p = entries.len() as f64;
        prop_assert!((trace(&t) - p).abs() <= 1e-10 * p);
    }
}

#[test]
fn sigma_tilde_dense_keeps_trace() {
    let mut rng = derive_stream(60, 0);
    let p = 12;
    let g = Distribution::gaussian().sample(p * p, &mut rng);
    let mut s = Mat::from_fn(p, p, |i, j| 0.1 * (g[i * p + j] + g[j * p + i]));
    for i in 0..p {
        s[(i, i)] += 2.0;
    }
    let cov = CovModel::dense(s).unwrap();
    for tau in [1.5, 3.0, 20.0] {
        let t = sigma_tilde(&cov, tau).unwrap();
        assert!((trace(&t) - p as f64).abs() < 1e-10 * p as f64);
    }
}

#[test]
fn sign_cov_discrepancy_shrinks_with_dimension() {
    for alpha in [2.0, 4.5] {
        let d = Distribution::student_t(alpha).unwrap();
        let v: Vec<f64> = [32usize, 128]
            .iter()
            .map(|&p| {
                sign_cov_discrepancy(&d, &two_atom_sigma(p).unwrap(), 10_000, &mut derive_stream(61, p as u64)).unwrap()
            })
            .collect();
        println!("alpha {alpha}: discrepancy at p = 32, 128: {v:?}");
        assert!(v[1] < v[0], "alpha {alpha}: {v:?}");
    }
}

// ---------------------------------------------------------------- MP law

#[test]
fn emitted_solutions_satisfy_equation() {
    let two = two_atom_sigma(2).unwrap().spectral_dist();
    let three = SpectralDist::new(vec![0.5, 1.0, 3.0], vec![0.2, 0.5, 0.3]).unwrap();
    for (h, y) in [(&two, 0.3), (&two, 1.0), (&two, 2.5), (&three, 0.5)] {
        let law = density_cdf(y, h, GridSpec::default_for(y, h)).unwrap();
        for (x, m) in law.grid.iter().zip(&law.m_values) {
            let z = Complex64::new(*x, law.epsilon);
            assert!(residual(*m, z, y, h) <= 1e-8, "y={y} x={x}");
            assert!(m.im >= 0.0);
        }
        assert!(law.density.iter().all(|d| *d >= 0.0));
        assert!(law.cdf.windows(2).all(|w| w[1] >= w[0]));
        assert!((law.cdf[0] - law.zero_atom).abs() < 1e-3);
        assert!((law.cdf[law.cdf.len() - 1] - 1.0).abs() < 1e-3);
        assert_eq!(law.zero_atom, (1.0 - 1.0 / y).max(0.0));
    }
}

#[test]
fn density_matches_identity_closed_form() {
    let h = SpectralDist::point(1.0).unwrap();
    for y in [0.25, 0.5, 1.0] {
        let law = density_cdf(y, &h, GridSpec::default_for(y, &h)).unwrap();
        let (a, b) = ((1.0 - f64::sqrt(y)).powi(2), (1.0 + f64::sqrt(y)).powi(2));
        let margin = 0.01 * (b - a);
        let worst = law
            .grid
            .iter()
            .zip(&law.density)
            .filter(|(x, _)| **x > a + margin && **x < b - margin)
            .map(|(x, d)| (d - mp_closed_form_density(*x, y)).abs())
            .fold(0.0, f64::max);
        assert!(worst < 1e-3, "y={y}: {worst}");
    }
}

#[test]
fn cdf_self_converges_under_refinement() {
    let h = two_atom_sigma(2).unwrap().spectral_dist();
    for y in [0.5, 1.0] {
        let g = GridSpec::default_for(y, &h);
        let coarse = density_cdf(y, &h, g).unwrap();
        let fine = density_cdf(y, &h, GridSpec { points: 2 * g.points - 1, ..g }).unwrap();
        let worst = coarse
            .grid
            .iter()
            .enumerate()
            .map(|(i, _)| (coarse.cdf[i] - fine.cdf[2 * i]).abs())
            .fold(0.0, f64::max);
        assert!(worst < 1e-4, "y={y}: {worst}");
    }
}

// ---------------------------------------------------------------- spectra

#[test]
fn esd_traces_and_squared_traces() {
    let cov = two_atom_sigma(40).unwrap();
    for r in 0..10u64 {
        let mut rng = derive_stream(70, r);
        let x = sample_data(60, &cov, &Distribution::student_t(1.5).unwrap(), &mut rng);
        let b = spatial_sign_cov(x.as_ref()).unwrap();
        let ev = eigenvalues_sym(b.as_ref()).unwrap();
        let p = 40.0;
        assert!((ev.iter().sum::<f64>() - p).abs() < 1e-8 * p);
        let sq: f64 = ev.iter().map(|v| v * v).sum();
        assert!((trace_of_square(b.as_ref()) - sq).abs() < 1e-8 * p * p);
    }
}

#[test]
fn kolmogorov_distance_is_stable_under_grid_refinement() {
    let cov = two_atom_sigma(100).unwrap();
    let h = cov.spectral_dist();
    let g = GridSpec::default_for(0.5, &h);
    let coarse = density_cdf(0.5, &h, g).unwrap();
    let fine = density_cdf(0.5, &h, GridSpec { points: 4 * g.points, ..g }).unwrap();
    for alpha in [0.8, 3.0] {
        let e = simulate_esd(200, &cov, &Distribution::student_t(alpha).unwrap(), 71, 0).unwrap();
        let a = kolmogorov_distance(&e, &coarse, f64::INFINITY).unwrap();
        let b = kolmogorov_distance(&e, &fine, f64::INFINITY).unwrap();
        assert!((0.0..=1.0).contains(&a));
        assert!((a - b).abs() < 1e-3, "{a} vs {b}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn kolmogorov_distance_in_unit_interval(values in prop::collection::vec(0.0f64..6.0, 1..60)) {
        let h = SpectralDist::point(1.0).unwrap();
        let law = density_cdf(0.5, &h, GridSpec::default_for(0.5, &h)).unwrap();
        let s: f64 = values.iter().sum();
        prop_assume!(s > 0.0);
        let p = values.len();
        let ev: Vec<f64> = values.iter().map(|v| v * p as f64 / s).collect();
        let meta = EsdMeta { n: 1, p, alpha: 1.0, dist: DistKind::StudentT, sigma: "identity".into(), seed: 0, replicate: 0 };
        let d = kolmogorov_distance(&EsdSample::new(ev, meta).unwrap(), &law, f64::INFINITY).unwrap();
        prop_assert!((0.0..=1.0).contains(&d));
    }
}

#[test]
fn gaussian_spectra_are_close_to_marchenko_pastur() {
    let cov = CovModel::identity(200).unwrap();
    let h = cov.spectral_dist();
    let law = density_cdf(0.5, &h, GridSpec::default_for(0.5, &h)).unwrap();
    let esds = simulate_esds(400, &cov, &Distribution::gaussian(), 20, 72).unwrap();
    for e in &esds {
        let d = kolmogorov_distance(e, &law, 0.5).unwrap();
        assert!(d < 0.05, "replicate {}: {d}", e.meta().replicate);
    }
}

#[test]
fn ks_trend_for_moderate_and_very_heavy_tails() {
    let mut medians = Vec::new();
    for p in [200usize, 800, 2000] {
        let cov = two_atom_sigma(p).unwrap();
        let h = cov.spectral_dist();
        let law = density_cdf(0.5, &h, GridSpec::default_for(0.5, &h)).unwrap();
        let mut row = Vec::new();
        for alpha in [2.5, 0.5] {
            let esds = simulate_esds(2 * p, &cov, &Distribution::student_t(alpha).unwrap(), 10, 73 + p as u64).unwrap();
            let d: Vec<f64> = esds.iter().map(|e| kolmogorov_distance(e, &law, f64::INFINITY).unwrap()).collect();
            row.push(median(&d));
        }
        medians.push(row);
    }
    println!("median KS (alpha 2.5, alpha 0.5) at p = 200, 800, 2000: {medians:?}");
    assert!(medians[1][0] < medians[0][0] && medians[2][0] < medians[1][0]);
    assert!(medians[2][1] > 3.0 * medians[2][0]);
}

// ---------------------------------------------------------------- CLT

#[test]
fn tau_term_vanishes_for_identity() {
    let h = SpectralDist::point(1.0).unwrap();
    let base = clt_mean_var(&h, 0.8, 3.0).unwrap();
    for tau in [1.1, 5.0, 15.0, 1e3] {
        assert_eq!(clt_mean_var(&h, 0.8, tau).unwrap(), base);
    }
}

proptest! {
    #[test]
    fn clt_constants_ignore_atom_splitting(t in 0.2f64..3.0, w in 0.05f64..0.95, y in 0.05f64..3.0, tau in 1.01f64..40.0) {
        let merged = SpectralDist::new(vec![t, 1.0], vec![w, 1.0 - w]).unwrap();
        let split = SpectralDist::new(vec![t, 1.0, t], vec![w / 2.0, 1.0 - w, w / 2.0]).unwrap();
        let a = clt_mean_var(&merged, y, tau).unwrap();
        let b = clt_mean_var(&split, y, tau).unwrap();
        prop_assert!((a.0 - b.0).abs() <= 1e-12 * a.0.abs().max(1.0));
        prop_assert!((a.1 - b.1).abs() <= 1e-12 * a.1.abs().max(1.0));
    }
}

#[test]
fn two_atom_variance_exact() {
    let (_, s2) = clt_mean_var(&two_atom_sigma(2).unwrap().spectral_dist(), 1.0, 15.0).unwrap();
    assert!((s2 - 6.390784).abs() < 1e-6);
}

#[test]
fn gaussian_clt_half_aspect() {
    let r = clt_experiment(400, &Distribution::gaussian(), &CovModel::identity(200).unwrap(), 500, 74).unwrap();
    println!("n=400 p=200: mean {} var {} ks {}", r.sample_mean, r.sample_var, r.ks_stat);
    assert_eq!((r.mu, r.sigma2), (-0.5, 1.0));
    assert!((r.sample_mean + 0.5).abs() < 0.2);
    assert!((r.sample_var - 1.0).abs() < 0.3);
    assert!(r.ks_pass);
}

#[test]
fn gaussian_clt_square() {
    let r = clt_experiment(200, &Distribution::gaussian(), &CovModel::identity(200).unwrap(), 500, 75).unwrap();
    println!("n=p=200: mean {} var {} ks {}", r.sample_mean, r.sample_var, r.ks_stat);
    assert_eq!((r.mu, r.sigma2), (-1.0, 4.0));
    assert!((r.sample_mean - r.mu).abs() < 0.3);
    assert!((r.sample_var / r.sigma2 - 1.0).abs() < 0.3);
    assert!(r.ks_pass);
}

// ---------------------------------------------------------------- seeding

proptest! {
    #[test]
    fn derived_streams_are_reproducible(seed in any::<u64>(), idx in any::<u64>()) {
        let a: Vec<u64> = (0..100).scan(derive_stream(seed, idx), |r, _| Some(r.random())).collect();
        let b: Vec<u64> = (0..100).scan(derive_stream(seed, idx), |r, _| Some(r.random())).collect();
        prop_assert_eq!(&a, &b);
        let c: u64 = derive_stream(seed, idx.wrapping_add(1)).random();
        prop_assert_ne!(a[0], c);
    }
}
