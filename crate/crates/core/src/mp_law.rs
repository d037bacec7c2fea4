//! Generalized Marčenko–Pastur law: solving
//! `m = Σⱼ wⱼ / (tⱼ(1 − y − y·z·m) − z)` for the Stieltjes transform and
//! recovering the limiting density and distribution function.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix_model::SpectralDist;

/// Residual target `|m − F(m)| ≤ RESIDUAL_TOL·max(1, |m|)` for a solved point.
pub const RESIDUAL_TOL: f64 = 1e-12;
/// Damping of the fixed-point fallback.
pub const DAMPING: f64 = 0.5;
/// Iteration cap of the fixed-point fallback.
pub const MAX_FIXED_POINT_ITERS: usize = 100_000;
/// Grid points solved sequentially (with warm starts) per parallel task.
pub const GRID_CHUNK: usize = 256;

/// The fixed-point map `F(m) = Σⱼ wⱼ/(tⱼ(1−y−yzm)−z)` and its derivative.
fn map_and_derivative(m: Complex64, z: Complex64, y: f64, h: &SpectralDist) -> (Complex64, Complex64) {
    let base = 1.0 - y - y * z * m;
    let mut f = Complex64::new(0.0, 0.0);
    let mut df = Complex64::new(0.0, 0.0);
    for (&t, &w) in h.atoms().iter().zip(h.weights()) {
        let inv = 1.0 / (t * base - z);
        f += w * inv;
        df += w * t * y * z * inv * inv;
    }
    (f, df)
}

/// `|m − F(m)|`.
pub fn residual(m: Complex64, z: Complex64, y: f64, h: &SpectralDist) -> f64 {
    (m - map_and_derivative(m, z, y, h).0).norm()
}

/// Companion transform `m̲ = −(1−y)/z + y·m`.
pub fn companion(m: Complex64, z: Complex64, y: f64) -> Complex64 {
    -(1.0 - y) / z + y * m
}

fn scaled_tol(m: Complex64) -> f64 {
    RESIDUAL_TOL * m.norm().max(1.0)
}

fn in_branch(m: Complex64, z: Complex64, y: f64) -> bool {
    let mc = companion(m, z, y);
    m.im > 0.0 && mc.im > -1e-12 * mc.norm().max(1.0) && m.is_finite()
}

/// Outcome of a successful solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Solved {
    pub m: Complex64,
    pub residual: f64,
}

/// Newton's method on `m − F(m) = 0` with step halving that keeps iterates in
/// the upper half plane.
fn newton(z: Complex64, y: f64, h: &SpectralDist, start: Complex64) -> Option<Solved> {
    let mut m = start;
    if !(m.im > 0.0) || !m.is_finite() {
        return None;
    }
    let mut r = residual(m, z, y, h);
    for _ in 0..200 {
        if r <= 0.01 * scaled_tol(m) {
            break;
        }
        let (f, df) = map_and_derivative(m, z, y, h);
        let g = m - f;
        let dg = 1.0 - df;
        if dg.norm() == 0.0 || !dg.is_finite() {
            return None;
        }
        let step = g / dg;
        let mut lambda = 1.0;
        let mut accepted = None;
        while lambda > 1e-12 {
            let cand = m - lambda * step;
            if cand.im > 0.0 && cand.is_finite() {
                let rc = residual(cand, z, y, h);
                if rc < r {
                    accepted = Some((cand, rc));
                    break;
                }
            }
            lambda *= 0.5;
        }
        match accepted {
            Some((cand, rc)) => {
                let moved = (cand - m).norm();
                m = cand;
                r = rc;
                if moved <= 1e-16 * m.norm() {
                    break;
                }
            }
            None => break,
        }
    }
    (r <= scaled_tol(m)).then_some(Solved { m, residual: r })
}

/// Newton along `x + i·v` with `v` shrinking geometrically from an easy
/// starting height down to `Im z`.
fn continuation(z: Complex64, y: f64, h: &SpectralDist) -> Option<Solved> {
    let target = z.im;
    let mut v = (4.0 * target).max(1.0 + z.re.abs() + h.max_atom());
    let mut zk = Complex64::new(z.re, v);
    let mut current = newton(zk, y, h, -1.0 / zk)?;
    let mut factor = 0.25;
    let mut stages = 0;
    while v > target {
        stages += 1;
        if stages > 2000 {
            return None;
        }
        let next = (v * factor).max(target);
        zk = Complex64::new(z.re, next);
        match newton(zk, y, h, current.m) {
            Some(s) if in_branch(s.m, zk, y) => {
                current = s;
                v = next;
                factor = (factor * 0.5).max(0.01);
            }
            _ => {
                factor = factor.sqrt();
                if factor > 0.999 {
                    return None;
                }
            }
        }
    }
    Some(current)
}

/// Damped iteration `m ← (1−ω)m + ωF(m)` with `ω` halved after 10⁴
/// iterations without improvement of the best residual.
pub fn damped_fixed_point(z: Complex64, y: f64, h: &SpectralDist, start: Complex64) -> Result<Solved> {
    check_args(z, y)?;
    let mut omega = DAMPING;
    let mut m = start;
    let mut best = Solved {
        m,
        residual: residual(m, z, y, h),
    };
    let mut since_best = 0;
    for _ in 0..MAX_FIXED_POINT_ITERS {
        let f = map_and_derivative(m, z, y, h).0;
        let r = (m - f).norm();
        if r < best.residual {
            best = Solved { m, residual: r };
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= 10_000 {
                omega *= 0.5;
                since_best = 0;
            }
        }
        if r <= scaled_tol(m) {
            break;
        }
        m = (1.0 - omega) * m + omega * f;
    }
    if best.residual > scaled_tol(best.m) {
        return Err(Error::NonConvergence {
            what: "Marchenko-Pastur fixed point",
            achieved: best.residual,
            target: scaled_tol(best.m),
        });
    }
    if !in_branch(best.m, z, y) {
        return Err(Error::WrongBranch {
            re: best.m.re,
            im: best.m.im,
        });
    }
    Ok(best)
}

fn check_args(z: Complex64, y: f64) -> Result<()> {
    if !(z.im > 0.0) || !z.is_finite() {
        return Err(Error::Contract(format!("Stieltjes argument must lie in the upper half plane, got {z}")));
    }
    if !(y > 0.0 && y.is_finite()) {
        return Err(Error::Contract(format!("aspect ratio must be positive, got {y}")));
    }
    Ok(())
}

/// Solves for `m(z)`, optionally warm-started from a nearby solution.
///
/// Newton's method is tried first from `start` and from `−1/z`, then along a
/// continuation path in `Im z`, and finally the damped fixed-point iteration.
pub fn solve_m_from(z: Complex64, y: f64, h: &SpectralDist, start: Option<Complex64>) -> Result<Solved> {
    check_args(z, y)?;
    let initial = -1.0 / z;
    for s in start.into_iter().chain(std::iter::once(initial)) {
        if let Some(sol) = newton(z, y, h, s) {
            if in_branch(sol.m, z, y) {
                return Ok(sol);
            }
        }
    }
    if let Some(sol) = continuation(z, y, h) {
        return Ok(sol);
    }
    log::debug!("Newton continuation failed at z = {z}; falling back to damped iteration");
    match damped_fixed_point(z, y, h, initial) {
        Err(Error::WrongBranch { .. }) => {
            damped_fixed_point(z, y, h, initial + Complex64::new(0.0, 1.0 / z.im.max(1e-300).sqrt()))
        }
        other => other,
    }
}

/// Stieltjes transform `m(z)` of the limiting spectral distribution.
pub fn solve_m(z: Complex64, y: f64, h: &SpectralDist) -> Result<Complex64> {
    solve_m_from(z, y, h, None).map(|s| s.m)
}

/// Spectral grid for [`density_cdf`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub x_min: f64,
    pub x_max: f64,
    pub points: usize,
}

impl GridSpec {
    /// `[max(0, a − 0.1), b + 0.1]` with 2000 points, where `a`, `b` are the
    /// identity-covariance support edges scaled by the extreme atoms of `H`.
    pub fn default_for(y: f64, h: &SpectralDist) -> Self {
        let a = (1.0 - y.sqrt()).powi(2) * h.min_atom();
        let b = (1.0 + y.sqrt()).powi(2) * h.max_atom();
        Self {
            x_min: (a - 0.1).max(0.0),
            x_max: b + 0.1,
            points: 2000,
        }
    }

    pub fn xs(&self) -> Vec<f64> {
        let step = (self.x_max - self.x_min) / (self.points - 1) as f64;
        (0..self.points)
            .map(|i| if i + 1 == self.points { self.x_max } else { self.x_min + step * i as f64 })
            .collect()
    }

    fn validate(&self) -> Result<()> {
        if !(self.x_min >= 0.0 && self.x_max > self.x_min && self.x_max.is_finite()) {
            return Err(Error::Contract(format!(
                "grid needs 0 <= x_min < x_max, got [{}, {}]",
                self.x_min, self.x_max
            )));
        }
        if self.points < 100 {
            return Err(Error::Contract(format!("grid needs at least 100 points, got {}", self.points)));
        }
        Ok(())
    }
}

/// Limiting law of the spectral distribution on a grid.
#[derive(Debug, Clone, Serialize)]
pub struct MpSolution {
    pub y: f64,
    pub h_atoms: Vec<f64>,
    pub h_weights: Vec<f64>,
    pub grid: Vec<f64>,
    /// `m(x + iε)` at every grid point.
    #[serde(skip)]
    pub m_values: Vec<Complex64>,
    /// Density of the continuous part.
    pub density: Vec<f64>,
    /// Distribution function including the atom at zero.
    pub cdf: Vec<f64>,
    pub zero_atom: f64,
    /// Largest fixed-point residual over all solves.
    pub max_residual: f64,
    pub epsilon: f64,
    /// Continuous mass before renormalization.
    pub raw_mass: f64,
}

impl MpSolution {
    /// `F(x)` by linear interpolation; `0` left of zero and `1` past the grid.
    pub fn cdf_at(&self, x: f64) -> f64 {
        if x < 0.0 {
            return 0.0;
        }
        let g = &self.grid;
        if x <= g[0] {
            return self.zero_atom;
        }
        if x >= g[g.len() - 1] {
            return 1.0;
        }
        let i = g.partition_point(|&v| v <= x) - 1;
        let t = (x - g[i]) / (g[i + 1] - g[i]);
        self.cdf[i] + t * (self.cdf[i + 1] - self.cdf[i])
    }

    /// Continuous density by linear interpolation, `0` off the grid.
    pub fn density_at(&self, x: f64) -> f64 {
        let g = &self.grid;
        if x < g[0] || x > g[g.len() - 1] {
            return 0.0;
        }
        let i = (g.partition_point(|&v| v <= x) - 1).min(g.len() - 2);
        let t = (x - g[i]) / (g[i + 1] - g[i]);
        self.density[i] + t * (self.density[i + 1] - self.density[i])
    }
}

fn continuous_density(m: Complex64, z: Complex64, atom: f64) -> f64 {
    // Remove the Stieltjes transform −atom/z of the point mass at zero.
    (m + atom / z).im / std::f64::consts::PI
}

/// Density and distribution function of the limiting law on `grid`.
///
/// The density is `Im m(x + iε)/π` with `ε = 10⁻⁶·(x_max − x_min)`, refined by
/// one Richardson step between `ε` and `ε/2`.
pub fn density_cdf(y: f64, h: &SpectralDist, grid: GridSpec) -> Result<MpSolution> {
    grid.validate()?;
    if !(y > 0.0 && y.is_finite()) {
        return Err(Error::Contract(format!("aspect ratio must be positive, got {y}")));
    }
    let xs = grid.xs();
    let eps = 1e-6 * (grid.x_max - grid.x_min);
    let zero_atom = (1.0 - 1.0 / y).max(0.0);

    let chunks: Vec<Result<Vec<(Complex64, f64, f64)>>> = xs
        .par_chunks(GRID_CHUNK)
        .map(|chunk| {
            let mut warm: Option<(Complex64, Complex64)> = None;
            let mut out = Vec::with_capacity(chunk.len());
            for &x in chunk {
                let z1 = Complex64::new(x, eps);
                let z2 = Complex64::new(x, 0.5 * eps);
                let s1 = solve_m_from(z1, y, h, warm.map(|w| w.0))?;
                let s2 = solve_m_from(z2, y, h, Some(s1.m))?;
                warm = Some((s1.m, s2.m));
                let d1 = continuous_density(s1.m, z1, zero_atom);
                let d2 = continuous_density(s2.m, z2, zero_atom);
                let d = (2.0 * d2 - d1).max(0.0);
                out.push((s1.m, d, s1.residual.max(s2.residual)));
            }
            Ok(out)
        })
        .collect();
    let mut m_values = Vec::with_capacity(xs.len());
    let mut density = Vec::with_capacity(xs.len());
    let mut max_residual: f64 = 0.0;
    for chunk in chunks {
        for (m, d, r) in chunk? {
            m_values.push(m);
            density.push(d);
            max_residual = max_residual.max(r);
        }
    }

    let hard_edge = xs[0] == 0.0 && y == 1.0;
    let mut cum = vec![0.0; xs.len()];
    for i in 1..xs.len() {
        let (a, b) = (xs[i - 1], xs[i]);
        let cell = if hard_edge {
            // Inverse square-root singularity at zero: integrate g(x)/√x with
            // g = d·√x linear on the cell (constant on the first one).
            let gb = density[i] * b.sqrt();
            let ga = if i == 1 { gb } else { density[i - 1] * a.sqrt() };
            let slope = (gb - ga) / (b - a);
            let i0 = 2.0 * (b.sqrt() - a.sqrt());
            let i1 = 2.0 / 3.0 * (b * b.sqrt() - a * a.sqrt());
            (ga - slope * a) * i0 + slope * i1
        } else {
            0.5 * (b - a) * (density[i - 1] + density[i])
        };
        cum[i] = cum[i - 1] + cell;
    }
    let raw_mass = cum[xs.len() - 1];
    let expected = 1.0 - zero_atom;
    if (raw_mass - expected).abs() > 0.01 * expected {
        return Err(Error::GridTooCoarse {
            mass: raw_mass,
            expected,
        });
    }
    let scale = expected / raw_mass;
    density.iter_mut().for_each(|d| *d *= scale);
    let cdf: Vec<f64> = cum.iter().map(|c| (zero_atom + c * scale).min(1.0)).collect();

    Ok(MpSolution {
        y,
        h_atoms: h.atoms().to_vec(),
        h_weights: h.weights().to_vec(),
        grid: xs,
        m_values,
        density,
        cdf,
        zero_atom,
        max_residual,
        epsilon: eps,
        raw_mass,
    })
}

/// Marčenko–Pastur density for identity covariance (continuous part only;
/// for `y > 1` it integrates to `1/y`).
pub fn mp_closed_form_density(x: f64, y: f64) -> f64 {
    let a = (1.0 - y.sqrt()).powi(2);
    let b = (1.0 + y.sqrt()).powi(2);
    if x <= a || x >= b || x <= 0.0 {
        return 0.0;
    }
    ((b - x) * (x - a)).sqrt() / (2.0 * std::f64::consts::PI * x * y)
}
