//! Central limit theorem for the linear spectral statistic `tr(B²)`.

use faer::{Mat, MatRef};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::heavy_tails::Distribution;
use crate::matrix_model::{sample_data, sigma_tilde, spatial_sign_cov, CovModel, SpectralDist};
use crate::rng::derive_stream;

/// Asymptotic critical value of the two-sided Kolmogorov–Smirnov test at level 0.01.
pub const KS_CRITICAL_1PCT: f64 = 1.6276;

/// Smallest replication count for which the asymptotic KS threshold is reported
/// as meaningful.
pub const KS_MIN_REPS: usize = 30;

/// Limiting mean `−y·α₂` and variance `4y(τ−1)(α₂³ − 2α₂α₃ + α₄) + 4y²α₂²`.
pub fn clt_mean_var(h: &SpectralDist, y: f64, tau: f64) -> Result<(f64, f64)> {
    if !(tau > 1.0 && tau.is_finite()) {
        return Err(Error::Domain(format!("fourth moment tau must be finite and > 1, got {tau}")));
    }
    if !(y > 0.0 && y.is_finite()) {
        return Err(Error::Domain(format!("aspect ratio must be positive, got {y}")));
    }
    let (a2, a3, a4) = (h.moment(2), h.moment(3), h.moment(4));
    let mu = -y * a2;
    let sigma2 = 4.0 * y * (tau - 1.0) * (a2.powi(3) - 2.0 * a2 * a3 + a4) + 4.0 * y * y * a2 * a2;
    if !(sigma2 > 0.0) {
        return Err(Error::Internal(format!("non-positive limiting variance {sigma2}")));
    }
    Ok((mu, sigma2))
}

/// `tr(M²) = ‖M‖_F²` for symmetric `M`.
pub fn trace_of_square(m: MatRef<'_, f64>) -> f64 {
    let mut s = 0.0;
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            s += m[(i, j)] * m[(i, j)];
        }
    }
    s
}

/// Centering `tr(Σ̃²) + p²/n`.
pub fn clt_center(cov: &CovModel, tau: f64, n: usize) -> Result<f64> {
    if n == 0 {
        return Err(Error::Contract("sample size must be at least 1".into()));
    }
    let t: Mat<f64> = sigma_tilde(cov, tau)?;
    let p = cov.p() as f64;
    Ok(trace_of_square(t.as_ref()) + p * p / n as f64)
}

#[derive(Debug, Clone, Serialize)]
pub struct CltResult {
    /// `tr(B²) − center` per replicate, in replicate order.
    pub statistics: Vec<f64>,
    pub mu: f64,
    pub sigma2: f64,
    pub center: f64,
    pub tau: f64,
    pub sample_mean: f64,
    pub sample_var: f64,
    pub ks_stat: f64,
    pub ks_pass: bool,
    /// False when `reps` is too small for the asymptotic KS threshold.
    pub ks_meaningful: bool,
    /// Whether the tail index exceeds 4.
    pub within_theorem_range: bool,
}

/// Standard normal distribution function.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// Two-sided KS statistic of `sample` against `Normal(mu, sigma2)`.
pub fn ks_normal(sample: &[f64], mu: f64, sigma2: f64) -> f64 {
    let mut v = sample.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    let sd = sigma2.sqrt();
    v.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = normal_cdf((x - mu) / sd);
            ((i + 1) as f64 / n - f).max(f - i as f64 / n)
        })
        .fold(0.0, f64::max)
        .clamp(0.0, 1.0)
}

/// Simulates `reps` values of `tr(B²) − tr(Σ̃²) − p²/n` and compares them with
/// the limiting normal law. Replicate `r` uses `derive_stream(seed, r)`.
pub fn clt_experiment(
    n: usize,
    dist: &Distribution,
    cov: &CovModel,
    reps: usize,
    seed: u64,
) -> Result<CltResult> {
    if n == 0 || reps == 0 {
        return Err(Error::Contract("n and reps must be at least 1".into()));
    }
    if !dist.is_standardized() {
        return Err(Error::Contract("the CLT needs a standardized distribution".into()));
    }
    let tau = dist.tau().ok_or_else(|| {
        Error::Domain(format!(
            "tail index {} gives an infinite fourth moment; the centering needs a finite tau",
            dist.alpha()
        ))
    })?;
    let within_theorem_range = dist.alpha() > 4.0;
    let p = cov.p();
    let y = p as f64 / n as f64;
    let center = clt_center(cov, tau, n)?;
    let (mu, sigma2) = clt_mean_var(&cov.spectral_dist(), y, tau)?;
    let statistics: Vec<f64> = (0..reps as u64)
        .into_par_iter()
        .map(|r| {
            let mut rng = derive_stream(seed, r);
            let x = sample_data(n, cov, dist, &mut rng);
            let b = spatial_sign_cov(x.as_ref())?;
            Ok(trace_of_square(b.as_ref()) - center)
        })
        .collect::<Result<_>>()?;
    let k = statistics.len() as f64;
    let sample_mean = statistics.iter().sum::<f64>() / k;
    let sample_var = if statistics.len() > 1 {
        statistics.iter().map(|s| (s - sample_mean).powi(2)).sum::<f64>() / (k - 1.0)
    } else {
        0.0
    };
    let ks_stat = ks_normal(&statistics, mu, sigma2);
    Ok(CltResult {
        mu,
        sigma2,
        center,
        tau,
        sample_mean,
        sample_var,
        ks_pass: ks_stat < KS_CRITICAL_1PCT / k.sqrt(),
        ks_meaningful: reps >= KS_MIN_REPS,
        ks_stat,
        within_theorem_range,
        statistics,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix_model::two_atom_sigma;

    #[test]
    fn two_atom_constants() {
        let h = two_atom_sigma(2).unwrap().spectral_dist();
        let (mu, s2) = clt_mean_var(&h, 1.0, 15.0).unwrap();
        assert!((mu + 1.04).abs() < 1e-12);
        assert!((s2 - 6.390784).abs() < 1e-9);
    }

    #[test]
    fn identity_constants() {
        let h = SpectralDist::point(1.0).unwrap();
        let (mu, s2) = clt_mean_var(&h, 0.5, 3.0).unwrap();
        assert!((mu + 0.5).abs() < 1e-15);
        assert!((s2 - 1.0).abs() < 1e-15);
        for tau in [1.5, 9.0, 100.0] {
            assert_eq!(clt_mean_var(&h, 0.5, tau).unwrap().1, s2);
        }
    }

    #[test]
    fn merged_atoms_agree() {
        let split = SpectralDist::new(vec![1.0, 1.0], vec![0.5, 0.5]).unwrap();
        let single = SpectralDist::point(1.0).unwrap();
        let a = clt_mean_var(&split, 0.7, 6.0).unwrap();
        let b = clt_mean_var(&single, 0.7, 6.0).unwrap();
        assert!((a.0 - b.0).abs() < 1e-15 && (a.1 - b.1).abs() < 1e-14);
    }

    #[test]
    fn centers() {
        let id = CovModel::identity(10).unwrap();
        assert!((clt_center(&id, 5.0, 20).unwrap() - 15.0).abs() < 1e-12);
        let c = clt_center(&two_atom_sigma(2).unwrap(), 3.0, 2).unwrap();
        assert!((c - 4.000128).abs() < 1e-12);
        for p in [2usize, 10, 200] {
            let c = clt_center(&two_atom_sigma(p).unwrap(), 15.0, p).unwrap();
            let pf = p as f64;
            assert!((c - (2.04 * pf - 1.0752 + 7.225344 / pf)).abs() < 1e-9 * pf);
        }
    }

    #[test]
    fn single_replicate_is_flagged() {
        let r = clt_experiment(20, &Distribution::gaussian(), &CovModel::identity(10).unwrap(), 1, 3).unwrap();
        assert_eq!(r.statistics.len(), 1);
        assert!((0.0..=1.0).contains(&r.ks_stat));
        assert!(!r.ks_meaningful);
    }

    #[test]
    fn infinite_fourth_moment_is_rejected() {
        let d = Distribution::student_t(3.0).unwrap();
        assert!(matches!(
            clt_experiment(20, &d, &CovModel::identity(10).unwrap(), 5, 3),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn ks_normal_of_quantiles_is_small() {
        // Normal quantiles by bisection on the cdf.
        let n = 200;
        let sample: Vec<f64> = (0..n)
            .map(|i| {
                let level = (i as f64 + 0.5) / n as f64;
                let (mut a, mut b) = (-10.0, 10.0);
                for _ in 0..100 {
                    let c = 0.5 * (a + b);
                    if normal_cdf(c) < level {
                        a = c
                    } else {
                        b = c
                    }
                }
                2.0 + 3.0 * 0.5 * (a + b)
            })
            .collect();
        let d = ks_normal(&sample, 2.0, 9.0);
        assert!((d - 0.5 / n as f64).abs() < 1e-9);
    }
}
