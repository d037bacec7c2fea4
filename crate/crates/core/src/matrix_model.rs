//! Population covariance models, data generation `X = Z Σ^{1/2}` and the
//! spatial-sign covariance matrix `B = (p/n) Σ xᵢxᵢᵀ/‖xᵢ‖²`.

use std::path::Path;
use std::sync::OnceLock;

use faer::linalg::matmul::matmul;
use faer::{Accum, Mat, MatRef, Par, Side};
use rand::Rng;

use crate::error::{Error, Result};
use crate::heavy_tails::Distribution;

/// Rows with Euclidean norm below this are rejected by [`spatial_sign_cov`].
pub const ZERO_ROW_NORM: f64 = 1e-300;

/// Discrete spectral distribution `H = Σ wⱼ δ_{tⱼ}`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralDist {
    atoms: Vec<f64>,
    weights: Vec<f64>,
}

impl SpectralDist {
    pub fn new(atoms: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if atoms.is_empty() || atoms.len() != weights.len() {
            return Err(Error::Contract(format!(
                "spectral distribution needs matching non-empty atoms/weights ({} vs {})",
                atoms.len(),
                weights.len()
            )));
        }
        if atoms.iter().any(|&t| !(t > 0.0 && t.is_finite())) {
            return Err(Error::Domain("spectral atoms must be positive and finite".into()));
        }
        if weights.iter().any(|&w| !(w > 0.0)) {
            return Err(Error::Domain("spectral weights must be positive".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::Domain(format!("spectral weights sum to {total}, expected 1")));
        }
        Ok(Self { atoms, weights })
    }

    /// Point mass at `t`.
    pub fn point(t: f64) -> Result<Self> {
        Self::new(vec![t], vec![1.0])
    }

    /// Empirical distribution of `values`, equal values merged into one atom.
    pub fn from_values(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Contract("no values for spectral distribution".into()));
        }
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let w = 1.0 / values.len() as f64;
        let mut atoms: Vec<f64> = Vec::new();
        let mut counts: Vec<usize> = Vec::new();
        for v in sorted {
            match atoms.last() {
                Some(&last) if (v - last).abs() <= 1e-12 * last.abs().max(1.0) => {
                    *counts.last_mut().unwrap() += 1;
                }
                _ => {
                    atoms.push(v);
                    counts.push(1);
                }
            }
        }
        let weights = counts.iter().map(|&c| c as f64 * w).collect();
        Self::new(atoms, weights)
    }

    pub fn atoms(&self) -> &[f64] {
        &self.atoms
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `α_k = ∫ t^k dH(t)`.
    pub fn moment(&self, k: i32) -> f64 {
        self.atoms.iter().zip(&self.weights).map(|(t, w)| w * t.powi(k)).sum()
    }

    pub fn min_atom(&self) -> f64 {
        self.atoms.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_atom(&self) -> f64 {
        self.atoms.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

#[derive(Debug, Clone)]
pub enum CovForm {
    Identity,
    /// `(value, multiplicity)` blocks laid out along the diagonal in order.
    DiagonalAtoms(Vec<(f64, usize)>),
    DenseSpd(Mat<f64>),
}

/// Population covariance `Σ`, normalized so that `tr Σ = p`.
#[derive(Debug, Clone)]
pub struct CovModel {
    p: usize,
    form: CovForm,
    scale_factor: f64,
    sqrt: OnceLock<Mat<f64>>,
    eigenvalues: OnceLock<Vec<f64>>,
}

impl CovModel {
    fn build(p: usize, form: CovForm, scale_factor: f64) -> Self {
        if (scale_factor - 1.0).abs() > 1e-12 {
            log::debug!("covariance rescaled by {scale_factor} to enforce tr = p = {p}");
        }
        Self {
            p,
            form,
            scale_factor,
            sqrt: OnceLock::new(),
            eigenvalues: OnceLock::new(),
        }
    }

    pub fn identity(p: usize) -> Result<Self> {
        if p == 0 {
            return Err(Error::Contract("dimension must be at least 1".into()));
        }
        Ok(Self::build(p, CovForm::Identity, 1.0))
    }

    /// Block-diagonal model from `(value, count)` pairs, rescaled to `tr = p`.
    pub fn diagonal_atoms(blocks: &[(f64, usize)]) -> Result<Self> {
        let p: usize = blocks.iter().map(|b| b.1).sum();
        if p == 0 {
            return Err(Error::Contract("diagonal model has dimension 0".into()));
        }
        if blocks.iter().any(|&(v, _)| !(v > 0.0 && v.is_finite())) {
            return Err(Error::Domain("diagonal entries must be positive and finite".into()));
        }
        let trace: f64 = blocks.iter().map(|&(v, c)| v * c as f64).sum();
        let scale = p as f64 / trace;
        let blocks = blocks
            .iter()
            .filter(|b| b.1 > 0)
            .map(|&(v, c)| (v * scale, c))
            .collect();
        Ok(Self::build(p, CovForm::DiagonalAtoms(blocks), scale))
    }

    /// Diagonal model from explicit entries.
    pub fn diagonal(entries: &[f64]) -> Result<Self> {
        let mut blocks: Vec<(f64, usize)> = Vec::new();
        for &v in entries {
            match blocks.last_mut() {
                Some((last, c)) if *last == v => *c += 1,
                _ => blocks.push((v, 1)),
            }
        }
        Self::diagonal_atoms(&blocks)
    }

    /// Dense symmetric positive definite model, rescaled to `tr = p`.
    pub fn dense(mut sigma: Mat<f64>) -> Result<Self> {
        let p = sigma.nrows();
        if p == 0 || sigma.ncols() != p {
            return Err(Error::Contract(format!(
                "covariance must be square and non-empty, got {}x{}",
                sigma.nrows(),
                sigma.ncols()
            )));
        }
        check_symmetric(sigma.as_ref(), 1e-10)?;
        symmetrize(&mut sigma);
        let eig = sigma
            .self_adjoint_eigenvalues(Side::Lower)
            .map_err(|e| Error::Internal(format!("eigendecomposition failed: {e:?}")))?;
        if eig[0] <= 0.0 {
            return Err(Error::Contract(format!(
                "covariance is not positive definite (smallest eigenvalue {:e})",
                eig[0]
            )));
        }
        let trace: f64 = (0..p).map(|i| sigma[(i, i)]).sum();
        let scale = p as f64 / trace;
        sigma *= faer::Scale(scale);
        let model = Self::build(p, CovForm::DenseSpd(sigma), scale);
        let _ = model.eigenvalues.set(eig.iter().map(|l| l * scale).collect());
        Ok(model)
    }

    /// Reads a dense `p × p` matrix from a headerless comma-separated file.
    pub fn from_csv(path: &Path) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .from_path(path)
            .map_err(|source| Error::Csv {
                path: path.to_path_buf(),
                source,
            })?;
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for record in reader.records() {
            let record = record.map_err(|source| Error::Csv {
                path: path.to_path_buf(),
                source,
            })?;
            let row = record
                .iter()
                .map(|s| {
                    s.parse::<f64>()
                        .map_err(|e| Error::Config(format!("{}: bad number {s:?}: {e}", path.display())))
                })
                .collect::<Result<Vec<_>>>()?;
            rows.push(row);
        }
        let p = rows.len();
        if p == 0 || rows.iter().any(|r| r.len() != p) {
            return Err(Error::Config(format!("{}: expected a square matrix of reals", path.display())));
        }
        Self::dense(Mat::from_fn(p, p, |i, j| rows[i][j]))
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn form(&self) -> &CovForm {
        &self.form
    }

    /// Factor applied to the user's input to reach `tr Σ = p`.
    pub fn scale_factor(&self) -> f64 {
        self.scale_factor
    }

    /// Diagonal entries when the model is diagonal.
    pub fn diagonal_entries(&self) -> Option<Vec<f64>> {
        match &self.form {
            CovForm::Identity => Some(vec![1.0; self.p]),
            CovForm::DiagonalAtoms(blocks) => Some(
                blocks
                    .iter()
                    .flat_map(|&(v, c)| std::iter::repeat_n(v, c))
                    .collect(),
            ),
            CovForm::DenseSpd(_) => None,
        }
    }

    pub fn is_diagonal(&self) -> bool {
        !matches!(self.form, CovForm::DenseSpd(_))
    }

    pub fn matrix(&self) -> Mat<f64> {
        match &self.form {
            CovForm::DenseSpd(m) => m.clone(),
            _ => {
                let d = self.diagonal_entries().unwrap();
                Mat::from_fn(self.p, self.p, |i, j| if i == j { d[i] } else { 0.0 })
            }
        }
    }

    /// Symmetric square root `Σ^{1/2}`, computed once.
    pub fn sqrt(&self) -> &Mat<f64> {
        self.sqrt.get_or_init(|| match &self.form {
            CovForm::DenseSpd(m) => {
                let evd = m
                    .self_adjoint_eigen(Side::Lower)
                    .expect("eigendecomposition of a validated SPD matrix");
                let u = evd.U();
                let s = evd.S().column_vector();
                let scaled = Mat::from_fn(self.p, self.p, |i, j| u[(i, j)] * s[j].max(0.0).sqrt());
                let mut out = Mat::zeros(self.p, self.p);
                matmul(out.as_mut(), Accum::Replace, scaled.as_ref(), u.transpose(), 1.0, Par::Seq);
                symmetrize(&mut out);
                out
            }
            _ => {
                let d = self.diagonal_entries().unwrap();
                Mat::from_fn(self.p, self.p, |i, j| if i == j { d[i].sqrt() } else { 0.0 })
            }
        })
    }

    /// Eigenvalues of `Σ`, ascending.
    pub fn eigenvalues(&self) -> &[f64] {
        self.eigenvalues.get_or_init(|| match &self.form {
            CovForm::DenseSpd(m) => m
                .self_adjoint_eigenvalues(Side::Lower)
                .expect("eigenvalues of a validated SPD matrix"),
            _ => {
                let mut d = self.diagonal_entries().unwrap();
                d.sort_by(f64::total_cmp);
                d
            }
        })
    }

    /// Spectral distribution of `Σ` (the `H` of the limiting law at this `p`).
    pub fn spectral_dist(&self) -> SpectralDist {
        match &self.form {
            CovForm::Identity => SpectralDist::point(1.0).unwrap(),
            CovForm::DiagonalAtoms(blocks) => {
                let mut merged: Vec<(f64, usize)> = Vec::new();
                for &(v, c) in blocks {
                    match merged.iter_mut().find(|(u, _)| *u == v) {
                        Some(entry) => entry.1 += c,
                        None => merged.push((v, c)),
                    }
                }
                let p = self.p as f64;
                SpectralDist::new(
                    merged.iter().map(|b| b.0).collect(),
                    merged.iter().map(|b| b.1 as f64 / p).collect(),
                )
                .expect("validated diagonal blocks")
            }
            CovForm::DenseSpd(_) => SpectralDist::from_values(self.eigenvalues()).expect("non-empty spectrum"),
        }
    }

    /// Smallest `c` with `1/c ≤ λ_min ≤ λ_max ≤ c`.
    pub fn condition_bound(&self) -> f64 {
        let ev = self.eigenvalues();
        ev[ev.len() - 1].max(1.0 / ev[0])
    }

    /// Short human-readable description used in metadata.
    pub fn tag(&self) -> String {
        match &self.form {
            CovForm::Identity => "identity".into(),
            CovForm::DiagonalAtoms(blocks) => {
                let parts: Vec<String> = blocks.iter().map(|(v, c)| format!("{v}x{c}")).collect();
                format!("diag:{}", parts.join(","))
            }
            CovForm::DenseSpd(_) => format!("dense:{}", self.p),
        }
    }
}

/// `Σ = diag(1.2, …, 1.2, 0.8, …, 0.8)` with `p/2` copies of each.
pub fn two_atom_sigma(p: usize) -> Result<CovModel> {
    two_atom(p, 1.2, 0.8)
}

/// Half the diagonal at `v1`, half at `v2`, rescaled to `tr = p`.
pub fn two_atom(p: usize, v1: f64, v2: f64) -> Result<CovModel> {
    if p == 0 || p % 2 == 1 {
        return Err(Error::Contract(format!("two-atom model needs an even dimension, got {p}")));
    }
    CovModel::diagonal_atoms(&[(v1, p / 2), (v2, p / 2)])
}

pub(crate) fn check_symmetric(m: MatRef<'_, f64>, tol: f64) -> Result<()> {
    let n = m.nrows();
    if m.ncols() != n {
        return Err(Error::Contract(format!("matrix is {}x{}, not square", n, m.ncols())));
    }
    let mut scale: f64 = 1.0;
    for j in 0..n {
        for i in 0..n {
            scale = scale.max(m[(i, j)].abs());
        }
    }
    for j in 0..n {
        for i in (j + 1)..n {
            if (m[(i, j)] - m[(j, i)]).abs() > tol * scale {
                return Err(Error::Contract(format!(
                    "matrix is not symmetric at ({i}, {j}): {} vs {}",
                    m[(i, j)],
                    m[(j, i)]
                )));
            }
        }
    }
    Ok(())
}

pub(crate) fn symmetrize(m: &mut Mat<f64>) {
    let n = m.nrows();
    for j in 0..n {
        for i in (j + 1)..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

/// Euclidean norm without intermediate overflow.
pub(crate) fn stable_norm<I: IntoIterator<Item = f64> + Clone>(values: I) -> f64 {
    let max = values.clone().into_iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if max == 0.0 || !max.is_finite() {
        return max;
    }
    let ss: f64 = values.into_iter().map(|v| (v / max) * (v / max)).sum();
    max * ss.sqrt()
}

/// `n × p` data matrix whose rows are `Σ^{1/2} zᵢ` with i.i.d. entries of `zᵢ`.
pub fn sample_data<R: Rng + ?Sized>(n: usize, cov: &CovModel, dist: &Distribution, rng: &mut R) -> Mat<f64> {
    let p = cov.p();
    let sampler = dist.sampler();
    let mut z = Mat::<f64>::zeros(n, p);
    for i in 0..n {
        for j in 0..p {
            z[(i, j)] = sampler.draw(rng);
        }
    }
    match cov.form() {
        CovForm::Identity => z,
        CovForm::DiagonalAtoms(_) => {
            let d: Vec<f64> = cov.diagonal_entries().unwrap().iter().map(|v| v.sqrt()).collect();
            for (j, dj) in d.iter().enumerate() {
                for i in 0..n {
                    z[(i, j)] *= dj;
                }
            }
            z
        }
        CovForm::DenseSpd(_) => {
            let mut x = Mat::zeros(n, p);
            matmul(x.as_mut(), Accum::Replace, z.as_ref(), cov.sqrt().as_ref(), 1.0, Par::Seq);
            x
        }
    }
}

/// Spatial-sign covariance `B = (p/n) Σᵢ xᵢxᵢᵀ/‖xᵢ‖²` of the rows of `x`.
///
/// The result is exactly symmetric and has trace `p` up to rounding.
pub fn spatial_sign_cov(x: MatRef<'_, f64>) -> Result<Mat<f64>> {
    let (n, p) = (x.nrows(), x.ncols());
    if n == 0 || p == 0 {
        return Err(Error::Contract(format!("empty data matrix {n}x{p}")));
    }
    let factor = (p as f64 / n as f64).sqrt();
    // Columns of `u` are the scaled signs sqrt(p/n)·xᵢ/‖xᵢ‖.
    let mut u = Mat::<f64>::zeros(p, n);
    for i in 0..n {
        let norm = stable_norm((0..p).map(|j| x[(i, j)]));
        if !(norm >= ZERO_ROW_NORM) || !norm.is_finite() {
            return Err(Error::Domain(format!("row {i} has norm {norm:e}; cannot self-normalize")));
        }
        let c = factor / norm;
        for j in 0..p {
            u[(j, i)] = x[(i, j)] * c;
        }
    }
    let mut b = Mat::zeros(p, p);
    matmul(b.as_mut(), Accum::Replace, u.as_ref(), u.transpose(), 1.0, Par::Seq);
    symmetrize(&mut b);
    Ok(b)
}

/// Adjusted population matrix
/// `Σ̃ = Σ − (2/p)Σ² − ((τ−3)/p)Σ^{1/2}diag(Σ)Σ^{1/2} + ((2trΣ² + (τ−3)tr(Σ∘Σ))/p²)Σ`.
pub fn sigma_tilde(cov: &CovModel, tau: f64) -> Result<Mat<f64>> {
    check_tau(tau)?;
    let p = cov.p();
    let pf = p as f64;
    if let Some(d) = cov.diagonal_entries() {
        let tr_sq: f64 = d.iter().map(|v| v * v).sum();
        // tr(Σ∘Σ) = tr Σ² and Σ^{1/2}diag(Σ)Σ^{1/2} = Σ² on the diagonal.
        let c = (2.0 * tr_sq + (tau - 3.0) * tr_sq) / (pf * pf);
        let t: Vec<f64> = d
            .iter()
            .map(|&s| s - 2.0 / pf * s * s - (tau - 3.0) / pf * s * s + c * s)
            .collect();
        return Ok(Mat::from_fn(p, p, |i, j| if i == j { t[i] } else { 0.0 }));
    }
    let sigma = cov.matrix();
    let root = cov.sqrt();
    let mut sq = Mat::zeros(p, p);
    matmul(sq.as_mut(), Accum::Replace, sigma.as_ref(), sigma.as_ref(), 1.0, Par::Seq);
    let tr_sq: f64 = (0..p).map(|i| sq[(i, i)]).sum();
    let tr_hadamard: f64 = (0..p).map(|i| sigma[(i, i)] * sigma[(i, i)]).sum();
    // Σ^{1/2} diag(Σ) Σ^{1/2}
    let scaled = Mat::from_fn(p, p, |i, j| root[(i, j)] * sigma[(j, j)]);
    let mut sandwich = Mat::zeros(p, p);
    matmul(sandwich.as_mut(), Accum::Replace, scaled.as_ref(), root.as_ref(), 1.0, Par::Seq);
    let c = (2.0 * tr_sq + (tau - 3.0) * tr_hadamard) / (pf * pf);
    let mut out = Mat::from_fn(p, p, |i, j| {
        sigma[(i, j)] - 2.0 / pf * sq[(i, j)] - (tau - 3.0) / pf * sandwich[(i, j)] + c * sigma[(i, j)]
    });
    symmetrize(&mut out);
    Ok(out)
}

/// The compact form `Σ + ((τ−1)/p) Σ^{1/2}((1/p)tr(Σ²)I − Σ)Σ^{1/2}`, which
/// coincides with [`sigma_tilde`] whenever `Σ` is diagonal.
pub fn sigma_tilde_compact(cov: &CovModel, tau: f64) -> Result<Mat<f64>> {
    check_tau(tau)?;
    let p = cov.p();
    let pf = p as f64;
    let sigma = cov.matrix();
    let root = cov.sqrt();
    let mut sq = Mat::zeros(p, p);
    matmul(sq.as_mut(), Accum::Replace, sigma.as_ref(), sigma.as_ref(), 1.0, Par::Seq);
    let mean_sq = (0..p).map(|i| sq[(i, i)]).sum::<f64>() / pf;
    let inner = Mat::from_fn(p, p, |i, j| if i == j { mean_sq } else { 0.0 } - sigma[(i, j)]);
    let mut left = Mat::zeros(p, p);
    matmul(left.as_mut(), Accum::Replace, root.as_ref(), inner.as_ref(), 1.0, Par::Seq);
    let mut correction = Mat::zeros(p, p);
    matmul(correction.as_mut(), Accum::Replace, left.as_ref(), root.as_ref(), 1.0, Par::Seq);
    let mut out = Mat::from_fn(p, p, |i, j| sigma[(i, j)] + (tau - 1.0) / pf * correction[(i, j)]);
    symmetrize(&mut out);
    Ok(out)
}

fn check_tau(tau: f64) -> Result<()> {
    if tau > 1.0 && tau.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("fourth moment tau must be finite and > 1, got {tau}")))
    }
}

/// Unbiased estimate of `(1/p)‖p·E[YYᵀ/(YᵀΣY)] − I‖_F²` for `Y = Z/‖Z‖`.
///
/// The Monte Carlo average is split into two independent halves and the
/// squared norm is estimated by the cross inner product, which removes the
/// `O(p/reps)` noise floor a plug-in estimate would carry.
pub fn sign_cov_discrepancy<R: Rng + ?Sized>(
    dist: &Distribution,
    cov: &CovModel,
    reps: usize,
    rng: &mut R,
) -> Result<f64> {
    if reps < 2 {
        return Err(Error::Contract("need at least two replications".into()));
    }
    let p = cov.p();
    let sigma = cov.matrix();
    let sampler = dist.sampler();
    let mut halves = [Mat::<f64>::zeros(p, p), Mat::<f64>::zeros(p, p)];
    let mut counts = [0usize; 2];
    let mut z = vec![0.0; p];
    let mut sz = vec![0.0; p];
    for r in 0..reps {
        sampler.fill(rng, &mut z);
        let norm = stable_norm(z.iter().copied());
        if !(norm >= ZERO_ROW_NORM) {
            return Err(Error::Domain("sampled an all-zero vector".into()));
        }
        z.iter_mut().for_each(|v| *v /= norm);
        for (i, out) in sz.iter_mut().enumerate() {
            *out = (0..p).map(|j| sigma[(i, j)] * z[j]).sum();
        }
        let quad: f64 = z.iter().zip(&sz).map(|(a, b)| a * b).sum();
        let h = r % 2;
        let acc = &mut halves[h];
        let w = p as f64 / quad;
        for j in 0..p {
            let zj = z[j] * w;
            for i in 0..p {
                acc[(i, j)] += z[i] * zj;
            }
        }
        counts[h] += 1;
    }
    let mut cross = 0.0;
    for j in 0..p {
        for i in 0..p {
            let id = if i == j { 1.0 } else { 0.0 };
            let a = halves[0][(i, j)] / counts[0] as f64 - id;
            let b = halves[1][(i, j)] / counts[1] as f64 - id;
            cross += a * b;
        }
    }
    Ok(cross / p as f64)
}
