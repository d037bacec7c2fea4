//! Moments of self-normalized vectors `Y = Z/‖Z‖` and of quadratic forms in `Y`.
//!
//! Every Monte Carlo routine here splits its replications over a fixed set of
//! batches. Batch `b` draws from `derive_stream(master, b)`, where `master` is
//! taken from the caller's stream, so results are identical for any number of
//! worker threads. Standard errors are batch-means standard errors.

use faer::MatRef;
use rand::{Rng, RngCore};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::heavy_tails::Distribution;
use crate::matrix_model::{check_symmetric, stable_norm, CovModel};
use crate::quad::{self, Tolerance};
use crate::rng::derive_stream;

/// Number of batches used for batch-means standard errors.
pub const MC_BATCHES: usize = 100;

/// Relative tolerance of the outer integral in [`integral_moment`].
pub const INTEGRAL_REL_TOL: f64 = 1e-8;

/// Returns `z/‖z‖₂`.
pub fn self_normalize(z: &[f64]) -> Result<Vec<f64>> {
    let mut y = z.to_vec();
    normalize_in_place(&mut y)?;
    Ok(y)
}

fn normalize_in_place(z: &mut [f64]) -> Result<()> {
    let norm = stable_norm(z.iter().copied());
    if norm == 0.0 {
        return Err(Error::Domain("cannot self-normalize the zero vector".into()));
    }
    if !norm.is_finite() {
        return Err(Error::Domain("cannot self-normalize a non-finite vector".into()));
    }
    z.iter_mut().for_each(|v| *v /= norm);
    Ok(())
}

/// Which joint moment `E Y₁^{k₁}⋯Y_r^{k_r}` to compute, in dimension `p`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MomentSpec {
    exponents: Vec<u32>,
    p: usize,
}

impl MomentSpec {
    pub fn new(exponents: Vec<u32>, p: usize) -> Result<Self> {
        if exponents.is_empty() {
            return Err(Error::Contract("moment needs at least one exponent".into()));
        }
        if exponents.contains(&0) {
            return Err(Error::Contract("moment exponents must be positive".into()));
        }
        if exponents.len() > p {
            return Err(Error::Contract(format!(
                "{} exponents do not fit in dimension {p}",
                exponents.len()
            )));
        }
        Ok(Self { exponents, p })
    }

    pub fn exponents(&self) -> &[u32] {
        &self.exponents
    }

    pub fn p(&self) -> usize {
        self.p
    }

    /// `Σ kᵢ`.
    pub fn total(&self) -> u32 {
        self.exponents.iter().sum()
    }

    pub fn all_even(&self) -> bool {
        self.exponents.iter().all(|k| k % 2 == 0)
    }

    fn product(&self, y: &[f64]) -> f64 {
        self.exponents.iter().zip(y).map(|(&k, &v)| v.powi(k as i32)).product()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MomentMethod {
    MonteCarlo,
    Integral,
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct MomentEstimate {
    pub value: f64,
    /// Zero exactly when `method` is [`MomentMethod::Integral`].
    pub stderr: f64,
    pub method: MomentMethod,
}

/// Batch means of several statistics computed from the same replications.
#[derive(Debug, Clone)]
pub struct BatchMeans {
    /// `means[b][j]`: mean of statistic `j` within batch `b`.
    means: Vec<Vec<f64>>,
    counts: Vec<usize>,
}

impl BatchMeans {
    pub fn reps(&self) -> usize {
        self.counts.iter().sum()
    }

    pub fn stats(&self) -> usize {
        self.means.first().map_or(0, Vec::len)
    }

    /// Mean and batch-means standard error of `Σⱼ wⱼ·statⱼ`.
    pub fn combined(&self, weights: &[f64]) -> (f64, f64) {
        let per_batch: Vec<f64> = self
            .means
            .iter()
            .map(|m| m.iter().zip(weights).map(|(a, w)| a * w).sum())
            .collect();
        let total = self.reps() as f64;
        let mean = per_batch
            .iter()
            .zip(&self.counts)
            .map(|(v, &c)| v * c as f64)
            .sum::<f64>()
            / total;
        let b = per_batch.len() as f64;
        if b < 2.0 {
            return (mean, f64::NAN);
        }
        let bar = per_batch.iter().sum::<f64>() / b;
        let var = per_batch.iter().map(|v| (v - bar) * (v - bar)).sum::<f64>() / (b - 1.0);
        (mean, (var / b).sqrt())
    }

    pub fn mean(&self, j: usize) -> (f64, f64) {
        let mut w = vec![0.0; self.stats()];
        w[j] = 1.0;
        self.combined(&w)
    }
}

/// Runs `reps` replications of `stat(y, out)` on fresh self-normalized
/// `p`-vectors `y`, writing `nstats` values per replication.
pub fn mc_batches<R, F>(
    dist: &Distribution,
    p: usize,
    reps: usize,
    nstats: usize,
    rng: &mut R,
    stat: F,
) -> Result<BatchMeans>
where
    R: RngCore + ?Sized,
    F: Fn(&[f64], &mut [f64]) + Sync,
{
    if reps < MC_BATCHES {
        return Err(Error::Contract(format!("need at least {MC_BATCHES} replications, got {reps}")));
    }
    if p == 0 {
        return Err(Error::Contract("dimension must be at least 1".into()));
    }
    let master = rng.next_u64();
    let sampler = dist.sampler();
    let results: Vec<Result<(Vec<f64>, usize)>> = (0..MC_BATCHES)
        .into_par_iter()
        .map(|b| {
            let count = reps / MC_BATCHES + usize::from(b < reps % MC_BATCHES);
            let mut stream = derive_stream(master, b as u64);
            let mut y = vec![0.0; p];
            let mut out = vec![0.0; nstats];
            let mut sums = vec![0.0; nstats];
            for _ in 0..count {
                sampler.fill(&mut stream, &mut y);
                normalize_in_place(&mut y)?;
                stat(&y, &mut out);
                sums.iter_mut().zip(&out).for_each(|(s, v)| *s += v);
            }
            sums.iter_mut().for_each(|s| *s /= count as f64);
            Ok((sums, count))
        })
        .collect();
    let mut means = Vec::with_capacity(MC_BATCHES);
    let mut counts = Vec::with_capacity(MC_BATCHES);
    for r in results {
        let (m, c) = r?;
        means.push(m);
        counts.push(c);
    }
    Ok(BatchMeans { means, counts })
}

/// Monte Carlo estimate of `E ∏ Yᵢ^{kᵢ}`.
pub fn mc_moment<R: RngCore + ?Sized>(
    dist: &Distribution,
    spec: &MomentSpec,
    reps: usize,
    rng: &mut R,
) -> Result<MomentEstimate> {
    let batches = mc_batches(dist, spec.p(), reps, 1, rng, |y, out| out[0] = spec.product(y))?;
    let (value, stderr) = batches.mean(0);
    Ok(MomentEstimate {
        value,
        stderr,
        method: MomentMethod::MonteCarlo,
    })
}

/// Several moments estimated from one shared set of replications. All specs
/// must have the same dimension.
pub fn mc_moments<R: RngCore + ?Sized>(
    dist: &Distribution,
    specs: &[MomentSpec],
    reps: usize,
    rng: &mut R,
) -> Result<BatchMeans> {
    let p = specs
        .first()
        .ok_or_else(|| Error::Contract("no moment specs given".into()))?
        .p();
    if specs.iter().any(|s| s.p() != p) {
        return Err(Error::Contract("moment specs disagree on the dimension".into()));
    }
    mc_batches(dist, p, reps, specs.len(), rng, |y, out| {
        for (o, s) in out.iter_mut().zip(specs) {
            *o = s.product(y);
        }
    })
}

/// Deterministic evaluation of an even joint moment through
///
/// `E ∏ Yᵢ^{2kᵢ} = (1/Γ(k)) ∫₀^∞ s^{k−1} ∏ᵢ E[Z^{2kᵢ} e^{−sZ²}] φ(s)^{p−r} ds`, `k = Σ kᵢ`,
///
/// with `s = t/p` and the integrand assembled in log space.
pub fn integral_moment(dist: &Distribution, spec: &MomentSpec) -> Result<MomentEstimate> {
    if !spec.all_even() {
        return Err(Error::Contract(format!(
            "integral representation needs even exponents, got {:?}",
            spec.exponents()
        )));
    }
    let k = (spec.total() / 2) as f64;
    let p = spec.p() as f64;
    let r = spec.exponents().len() as f64;
    let ln_gamma_k = libm::lgamma(k);
    let mut failure: Option<Error> = None;
    let integrand = |t: f64| -> f64 {
        if t == 0.0 || failure.is_some() {
            return 0.0;
        }
        let s = t / p;
        let eval = || -> Result<f64> {
            let mut ln = (k - 1.0) * s.ln() - ln_gamma_k - p.ln();
            for &e in spec.exponents() {
                let d = dist.damped_moment(e, s)?;
                if d <= 0.0 {
                    return Ok(0.0);
                }
                ln += d.ln();
            }
            if p > r {
                ln += (p - r) * dist.ln_laplace(s)?;
            }
            Ok(ln.exp())
        };
        match eval() {
            Ok(v) => v,
            Err(e) => {
                failure = Some(e);
                0.0
            }
        }
    };
    let result = {
        let mut integrand = integrand;
        let r = quad::integrate_to_infinity(&mut integrand, 0.0, k.max(1.0), Tolerance::relative(INTEGRAL_REL_TOL));
        drop(integrand);
        r
    };
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(MomentEstimate {
        value: result?.value,
        stderr: 0.0,
        method: MomentMethod::Integral,
    })
}

/// Monte Carlo moments of quadratic forms `Y'AY`, `Y'BY`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct QuadformStats {
    pub mean_a: f64,
    pub mean_a_stderr: f64,
    pub cov_ab: f64,
    pub cov_ab_stderr: f64,
    pub var_a: f64,
    pub var_a_stderr: f64,
}

fn quad_form(a: MatRef<'_, f64>, y: &[f64]) -> f64 {
    let p = y.len();
    let mut total = 0.0;
    for j in 0..p {
        let col = a.col(j);
        let mut s = 0.0;
        for i in 0..p {
            s += col[i] * y[i];
        }
        total += s * y[j];
    }
    total
}

fn trace(a: MatRef<'_, f64>) -> f64 {
    (0..a.nrows()).map(|i| a[(i, i)]).sum()
}

fn check_square(a: MatRef<'_, f64>, p: usize, name: &str) -> Result<()> {
    if a.nrows() != p || a.ncols() != p {
        return Err(Error::Contract(format!(
            "{name} is {}x{}, expected {p}x{p}",
            a.nrows(),
            a.ncols()
        )));
    }
    check_symmetric(a, 1e-12)
}

/// Estimates `E Y'AY`, `cov(Y'AY, Y'BY)` and `var(Y'AY)`.
///
/// Centering uses the exact mean `tr(·)/p`, so the covariance estimates are
/// unbiased averages of per-replication products.
pub fn quadform_stats<R: RngCore + ?Sized>(
    dist: &Distribution,
    p: usize,
    a: MatRef<'_, f64>,
    b: MatRef<'_, f64>,
    reps: usize,
    rng: &mut R,
) -> Result<QuadformStats> {
    check_square(a, p, "A")?;
    check_square(b, p, "B")?;
    let ca = trace(a) / p as f64;
    let cb = trace(b) / p as f64;
    let batches = mc_batches(dist, p, reps, 3, rng, |y, out| {
        let qa = quad_form(a, y);
        let qb = quad_form(b, y);
        out[0] = qa;
        out[1] = (qa - ca) * (qb - cb);
        out[2] = (qa - ca) * (qa - ca);
    })?;
    let (mean_a, mean_a_stderr) = batches.mean(0);
    let (cov_ab, cov_ab_stderr) = batches.mean(1);
    let (var_a, var_a_stderr) = batches.mean(2);
    Ok(QuadformStats {
        mean_a,
        mean_a_stderr,
        cov_ab,
        cov_ab_stderr,
        var_a,
        var_a_stderr,
    })
}

/// `(τ−3)/p²·tr(A∘B) + 2/p²·tr(AB) + (1−τ)/p³·trA·trB`.
pub fn theoretical_cov(a: MatRef<'_, f64>, b: MatRef<'_, f64>, tau: f64, p: usize) -> f64 {
    let pf = p as f64;
    let mut hadamard = 0.0;
    let mut product = 0.0;
    for j in 0..p {
        hadamard += a[(j, j)] * b[(j, j)];
        for i in 0..p {
            product += a[(i, j)] * b[(j, i)];
        }
    }
    (tau - 3.0) / (pf * pf) * hadamard + 2.0 / (pf * pf) * product + (1.0 - tau) / pf.powi(3) * trace(a) * trace(b)
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct RatioStats {
    pub mean: f64,
    pub mean_stderr: f64,
    pub var: f64,
}

/// Monte Carlo mean and variance of `(Y'AY)/(Y'ΣY)`.
pub fn ratio_quadform_stats<R: RngCore + ?Sized>(
    dist: &Distribution,
    p: usize,
    a: MatRef<'_, f64>,
    sigma: &CovModel,
    reps: usize,
    rng: &mut R,
) -> Result<RatioStats> {
    check_square(a, p, "A")?;
    if sigma.p() != p {
        return Err(Error::Contract(format!("Sigma has dimension {}, expected {p}", sigma.p())));
    }
    let s = sigma.matrix();
    let batches = mc_batches(dist, p, reps, 2, rng, |y, out| {
        let ratio = quad_form(a, y) / quad_form(s.as_ref(), y);
        out[0] = ratio;
        out[1] = ratio * ratio;
    })?;
    let (mean, mean_stderr) = batches.mean(0);
    let (second, _) = batches.mean(1);
    let n = batches.reps() as f64;
    Ok(RatioStats {
        mean,
        mean_stderr,
        var: (second - mean * mean) * n / (n - 1.0),
    })
}

/// Expansion of `E (Y'AY)/(Y'ΣY)` for finite fourth moment `τ`:
///
/// `trA/p + (τ−3)/p³·(trA·tr(Σ∘Σ) − p·tr(A∘Σ)) + 2/p³·(trA·trΣ² − p·tr(AΣ))`.
pub fn theoretical_ratio_mean(a: MatRef<'_, f64>, sigma: &CovModel, tau: f64) -> f64 {
    let p = sigma.p();
    let pf = p as f64;
    let s = sigma.matrix();
    let mut had_ss = 0.0;
    let mut had_as = 0.0;
    let mut tr_ss = 0.0;
    let mut tr_as = 0.0;
    for j in 0..p {
        had_ss += s[(j, j)] * s[(j, j)];
        had_as += a[(j, j)] * s[(j, j)];
        for i in 0..p {
            tr_ss += s[(i, j)] * s[(j, i)];
            tr_as += a[(i, j)] * s[(j, i)];
        }
    }
    let tr_a = trace(a);
    tr_a / pf
        + (tau - 3.0) / pf.powi(3) * (tr_a * had_ss - pf * had_as)
        + 2.0 / pf.powi(3) * (tr_a * tr_ss - pf * tr_as)
}

/// Symmetric test matrix `(G + Gᵀ)/(2√(2p))` with Gaussian `G`; its spectral
/// norm is close to 1 for large `p`.
pub fn random_symmetric<R: Rng + ?Sized>(p: usize, rng: &mut R) -> faer::Mat<f64> {
    let g = Distribution::gaussian().sample(p * p, rng);
    let c = 1.0 / (2.0 * (2.0 * p as f64).sqrt());
    faer::Mat::from_fn(p, p, |i, j| (g[i * p + j] + g[j * p + i]) * c)
}
