//! Empirical spectral distributions of `B`: eigenvalues, pooled histograms and
//! the Kolmogorov distance to a limiting law.

use faer::linalg::matmul::matmul;
use faer::{Accum, Mat, MatRef, Par, Side};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::heavy_tails::{DistKind, Distribution};
use crate::matrix_model::{check_symmetric, sample_data, spatial_sign_cov, CovModel};
use crate::mp_law::MpSolution;
use crate::rng::derive_stream;

/// Relative symmetry tolerance accepted by the eigensolvers.
pub const SYMMETRY_TOL: f64 = 1e-10;

/// Eigenvalues of a symmetric matrix, ascending.
pub fn eigenvalues_sym(m: MatRef<'_, f64>) -> Result<Vec<f64>> {
    check_symmetric(m, SYMMETRY_TOL)?;
    if m.nrows() == 0 {
        return Ok(Vec::new());
    }
    let mut ev = m
        .self_adjoint_eigenvalues(Side::Lower)
        .map_err(|e| Error::Internal(format!("eigenvalue solver failed: {e:?}")))?;
    ev.sort_by(f64::total_cmp);
    Ok(ev)
}

/// Eigenvalues (ascending) and orthonormal eigenvectors (columns), checked by
/// `‖M − QΛQᵀ‖_F ≤ 10⁻⁸·‖M‖_F`.
pub fn eigen_sym(m: MatRef<'_, f64>) -> Result<(Vec<f64>, Mat<f64>)> {
    check_symmetric(m, SYMMETRY_TOL)?;
    let p = m.nrows();
    let evd = m
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Internal(format!("eigen decomposition failed: {e:?}")))?;
    let s = evd.S().column_vector();
    let values: Vec<f64> = (0..p).map(|i| s[i]).collect();
    let q = evd.U().to_owned();
    let scaled = Mat::from_fn(p, p, |i, j| q[(i, j)] * values[j]);
    let mut back = Mat::zeros(p, p);
    matmul(back.as_mut(), Accum::Replace, scaled.as_ref(), q.transpose(), 1.0, Par::Seq);
    let err = (back - m).norm_l2();
    let norm = m.norm_l2();
    if err > 1e-8 * norm.max(f64::MIN_POSITIVE) {
        return Err(Error::Internal(format!("eigen reconstruction error {err:e} (norm {norm:e})")));
    }
    Ok((values, q))
}

/// Provenance of one spectrum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EsdMeta {
    pub n: usize,
    pub p: usize,
    pub alpha: f64,
    pub dist: DistKind,
    pub sigma: String,
    pub seed: u64,
    pub replicate: u64,
}

/// Sorted spectrum of one spatial-sign covariance matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct EsdSample {
    eigenvalues: Vec<f64>,
    meta: EsdMeta,
}

impl EsdSample {
    /// Wraps a spectrum of `B`; the values must sum to `p` within `10⁻⁸·p`.
    pub fn new(mut eigenvalues: Vec<f64>, meta: EsdMeta) -> Result<Self> {
        if eigenvalues.len() != meta.p {
            return Err(Error::Contract(format!(
                "spectrum has {} values for p = {}",
                eigenvalues.len(),
                meta.p
            )));
        }
        eigenvalues.sort_by(f64::total_cmp);
        let sum: f64 = eigenvalues.iter().sum();
        let p = meta.p as f64;
        if (sum - p).abs() > 1e-8 * p {
            return Err(Error::Internal(format!("eigenvalues sum to {sum}, expected {p}")));
        }
        Ok(Self { eigenvalues, meta })
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn meta(&self) -> &EsdMeta {
        &self.meta
    }
}

/// Draws `X`, forms `B` and returns its spectrum, using `derive_stream(seed, replicate)`.
pub fn simulate_esd(
    n: usize,
    cov: &CovModel,
    dist: &Distribution,
    seed: u64,
    replicate: u64,
) -> Result<EsdSample> {
    let mut rng = derive_stream(seed, replicate);
    let x = sample_data(n, cov, dist, &mut rng);
    let b = spatial_sign_cov(x.as_ref())?;
    let meta = EsdMeta {
        n,
        p: cov.p(),
        alpha: dist.alpha(),
        dist: dist.kind(),
        sigma: cov.tag(),
        seed,
        replicate,
    };
    EsdSample::new(eigenvalues_sym(b.as_ref())?, meta)
}

/// `reps` independent spectra, replicate `r` drawn from `derive_stream(seed, r)`;
/// output is ordered by replicate.
pub fn simulate_esds(
    n: usize,
    cov: &CovModel,
    dist: &Distribution,
    reps: usize,
    seed: u64,
) -> Result<Vec<EsdSample>> {
    (0..reps as u64)
        .into_par_iter()
        .map(|r| simulate_esd(n, cov, dist, seed, r))
        .collect()
}

/// `sup_x |F^B(x) − F(x)|` for the step function of `esd` and the law `F`.
///
/// Eigenvalues within `10⁻⁹·p` of zero are treated as exact zeros so that the
/// atom of `F` at the origin is matched. Eigenvalues more than `margin` outside
/// the law's grid give a range error; pass `f64::INFINITY` to disable.
pub fn kolmogorov_distance(esd: &EsdSample, law: &MpSolution, margin: f64) -> Result<f64> {
    let ev = esd.eigenvalues();
    let p = ev.len();
    if p == 0 {
        return Err(Error::Contract("empty spectrum".into()));
    }
    let lo = law.grid[0];
    let hi = law.grid[law.grid.len() - 1];
    let zero_tol = 1e-9 * p as f64;
    let pf = p as f64;
    let mut d: f64 = 0.0;
    for (i, &raw) in ev.iter().enumerate() {
        let x = if raw.abs() <= zero_tol { 0.0 } else { raw };
        if (x > 0.0 && x < lo - margin) || x > hi + margin || x < 0.0 {
            return Err(Error::Range { value: raw, lo, hi });
        }
        let at = law.cdf_at(x);
        let left = if x == 0.0 { 0.0 } else { at };
        d = d.max((i + 1) as f64 / pf - at).max(left - i as f64 / pf);
    }
    Ok(d.clamp(0.0, 1.0))
}

/// Pooled histogram of eigenvalues.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
    /// `count / (total · width)`, where `total` counts every pooled eigenvalue.
    pub density: Vec<f64>,
    pub total: u64,
}

impl Histogram {
    pub fn width(&self, b: usize) -> f64 {
        self.edges[b + 1] - self.edges[b]
    }
}

/// Pooled histogram over the full range of the data.
pub fn histogram(samples: &[EsdSample], bins: usize) -> Result<Histogram> {
    let (lo, hi) = samples
        .iter()
        .flat_map(|s| s.eigenvalues().iter().copied())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        return Err(Error::Contract("no eigenvalues to bin".into()));
    }
    let hi = if hi > lo { hi } else { lo + 1.0 };
    histogram_in_range(samples, bins, lo, hi)
}

/// Pooled histogram with `bins` equal bins on `[lo, hi]`. Values outside the
/// range are not binned but still count toward the normalizing total.
pub fn histogram_in_range(samples: &[EsdSample], bins: usize, lo: f64, hi: f64) -> Result<Histogram> {
    if bins < 10 {
        return Err(Error::Contract(format!("need at least 10 bins, got {bins}")));
    }
    if !(hi > lo) {
        return Err(Error::Contract(format!("empty histogram range [{lo}, {hi}]")));
    }
    let width = (hi - lo) / bins as f64;
    let edges: Vec<f64> = (0..=bins)
        .map(|b| if b == bins { hi } else { lo + width * b as f64 })
        .collect();
    let mut counts = vec![0u64; bins];
    let mut total = 0u64;
    for v in samples.iter().flat_map(|s| s.eigenvalues().iter().copied()) {
        total += 1;
        if v >= lo && v <= hi {
            let b = (((v - lo) / width) as usize).min(bins - 1);
            counts[b] += 1;
        }
    }
    if total == 0 {
        return Err(Error::Contract("no eigenvalues to bin".into()));
    }
    let density = counts
        .iter()
        .enumerate()
        .map(|(b, &c)| c as f64 / (total as f64 * (edges[b + 1] - edges[b])))
        .collect();
    Ok(Histogram {
        edges,
        counts,
        density,
        total,
    })
}

/// Largest gap between histogram density and the law's average density over
/// each bin, `(F(right) − F(left))/width`.
pub fn histogram_deviation(hist: &Histogram, law: &MpSolution) -> f64 {
    (0..hist.counts.len())
        .map(|b| {
            let (l, r) = (hist.edges[b], hist.edges[b + 1]);
            let theory = (law.cdf_at(r) - law.cdf_at(l)) / (r - l);
            (hist.density[b] - theory).abs()
        })
        .fold(0.0, f64::max)
}

/// Median of a non-empty slice (mean of the middle pair for even length).
pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let k = v.len();
    if k % 2 == 1 {
        v[k / 2]
    } else {
        0.5 * (v[k / 2 - 1] + v[k / 2])
    }
}
