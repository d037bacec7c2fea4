//! Heavy-tailed populations: sampling, densities, Laplace transforms.
//!
//! All supported kinds are symmetric about zero. The Pareto law is symmetrized
//! with an independent random sign so that the centred-entry assumption of the
//! independent components model holds while the tail index is preserved.

use std::f64::consts::PI;
use std::fmt;

use rand::Rng;
use rand_distr::{ChiSquared, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad::{self, Tolerance};

/// Relative accuracy requested from every Laplace-type quadrature.
pub const LAPLACE_REL_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DistKind {
    StudentT,
    SymmetrizedPareto,
    Gaussian,
}

impl fmt::Display for DistKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DistKind::StudentT => "t",
            DistKind::SymmetrizedPareto => "pareto",
            DistKind::Gaussian => "gaussian",
        })
    }
}

/// An α-regularly varying, symmetric population for the entries `Z_ij`.
///
/// `alpha` is the tail index (degrees of freedom for Student-t). It is stored
/// as `+∞` for the Gaussian. When `standardized` is set the variate is
/// rescaled to unit variance, which requires `alpha > 2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Distribution {
    kind: DistKind,
    alpha: f64,
    theta: f64,
    standardized: bool,
}

impl Distribution {
    pub fn new(kind: DistKind, alpha: f64, theta: f64, standardized: bool) -> Result<Self> {
        if kind == DistKind::Gaussian {
            return Ok(Self::gaussian());
        }
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::Config(format!("tail index must be positive and finite, got {alpha}")));
        }
        if !(theta > 0.0 && theta.is_finite()) {
            return Err(Error::Config(format!("Pareto scale must be positive, got {theta}")));
        }
        if standardized && alpha <= 2.0 {
            return Err(Error::Config(format!(
                "cannot standardize a population with alpha = {alpha} <= 2 (infinite variance)"
            )));
        }
        Ok(Self {
            kind,
            alpha,
            theta,
            standardized,
        })
    }

    pub fn gaussian() -> Self {
        Self {
            kind: DistKind::Gaussian,
            alpha: f64::INFINITY,
            theta: 1.0,
            standardized: true,
        }
    }

    /// Student-t with `alpha` degrees of freedom, standardized iff `alpha > 2`.
    pub fn student_t(alpha: f64) -> Result<Self> {
        Self::new(DistKind::StudentT, alpha, 1.0, alpha > 2.0)
    }

    /// Sign-symmetrized Pareto `F_{α,θ}`, standardized iff `alpha > 2`.
    pub fn pareto(alpha: f64, theta: f64) -> Result<Self> {
        Self::new(DistKind::SymmetrizedPareto, alpha, theta, alpha > 2.0)
    }

    /// Same population with the standardization flag overridden.
    pub fn with_standardized(self, standardized: bool) -> Result<Self> {
        Self::new(self.kind, self.alpha, self.theta, standardized)
    }

    pub fn kind(&self) -> DistKind {
        self.kind
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn is_standardized(&self) -> bool {
        self.standardized
    }

    /// Multiplier applied to the raw variate.
    pub fn scale(&self) -> f64 {
        if !self.standardized {
            return 1.0;
        }
        match self.kind {
            DistKind::Gaussian => 1.0,
            DistKind::StudentT => ((self.alpha - 2.0) / self.alpha).sqrt(),
            DistKind::SymmetrizedPareto => {
                let var = 2.0 * self.theta * self.theta / ((self.alpha - 1.0) * (self.alpha - 2.0));
                1.0 / var.sqrt()
            }
        }
    }

    fn raw_density(&self, x: f64) -> f64 {
        match self.kind {
            DistKind::Gaussian => (-0.5 * x * x).exp() / (2.0 * PI).sqrt(),
            DistKind::StudentT => {
                let a = self.alpha;
                let ln_c = libm::lgamma(0.5 * (a + 1.0)) - libm::lgamma(0.5 * a) - 0.5 * (a * PI).ln();
                (ln_c - 0.5 * (a + 1.0) * (x * x / a).ln_1p()).exp()
            }
            DistKind::SymmetrizedPareto => {
                let (a, th) = (self.alpha, self.theta);
                0.5 * (a / th) * (-(a + 1.0) * (x.abs() / th).ln_1p()).exp()
            }
        }
    }

    /// Density of the (possibly standardized) variate.
    pub fn density(&self, x: f64) -> f64 {
        let c = self.scale();
        self.raw_density(x / c) / c
    }

    /// `E Z²`, or `None` when infinite.
    pub fn second_moment(&self) -> Option<f64> {
        if self.standardized {
            return Some(1.0);
        }
        match self.kind {
            DistKind::Gaussian => Some(1.0),
            _ if self.alpha <= 2.0 => None,
            DistKind::StudentT => Some(self.alpha / (self.alpha - 2.0)),
            DistKind::SymmetrizedPareto => {
                Some(2.0 * self.theta * self.theta / ((self.alpha - 1.0) * (self.alpha - 2.0)))
            }
        }
    }

    /// Kurtosis `τ = E Z⁴ / (E Z²)²`, i.e. `E Z⁴` of the standardized entry.
    /// `None` when the fourth moment is infinite (`alpha <= 4`).
    pub fn tau(&self) -> Option<f64> {
        let a = self.alpha;
        match self.kind {
            DistKind::Gaussian => Some(3.0),
            _ if a <= 4.0 => None,
            DistKind::StudentT => Some(3.0 * (a - 2.0) / (a - 4.0)),
            DistKind::SymmetrizedPareto => Some(6.0 * (a - 1.0) * (a - 2.0) / ((a - 3.0) * (a - 4.0))),
        }
    }

    pub fn sampler(&self) -> Sampler {
        let scale = self.scale();
        match self.kind {
            DistKind::Gaussian => Sampler::Gaussian,
            DistKind::StudentT => Sampler::StudentT {
                chi: ChiSquared::new(self.alpha).expect("alpha validated positive"),
                dof: self.alpha,
                scale,
            },
            DistKind::SymmetrizedPareto => Sampler::Pareto {
                inv_alpha: 1.0 / self.alpha,
                theta: self.theta,
                scale,
            },
        }
    }

    /// `count` i.i.d. draws.
    pub fn sample<R: Rng + ?Sized>(&self, count: usize, rng: &mut R) -> Vec<f64> {
        let sampler = self.sampler();
        (0..count).map(|_| sampler.draw(rng)).collect()
    }

    /// `2 ∫_0^∞ g(c·x) f_raw(x) dx` for the raw density, i.e. `E g(Z)` for even `g`.
    fn symmetric_expectation<G: Fn(f64) -> f64>(&self, g: G, spread: f64) -> Result<f64> {
        let c = self.scale();
        let r = quad::integrate_to_infinity(
            |x| {
                let v = g(c * x);
                if v == 0.0 {
                    0.0
                } else {
                    v * self.raw_density(x)
                }
            },
            0.0,
            spread,
            Tolerance::relative(LAPLACE_REL_TOL),
        )?;
        Ok(2.0 * r.value)
    }

    /// Raw-scale location of the bulk of `x^k e^{-s c² x²} f(x)`: the damped
    /// peak when the power outgrows the tail, else the unit scale shrunk to the
    /// Gaussian width `1/(c√s)` for large `s`.
    fn spread(&self, k: u32, s: f64) -> f64 {
        let c = self.scale();
        let tail = if self.alpha.is_finite() { self.alpha + 1.0 } else { 0.0 };
        let excess = (k as f64 - tail).max(0.0);
        let peak = (excess / (2.0 * s * c * c)).sqrt();
        peak.max((1.0 / (c * s.sqrt())).min(1.0))
    }

    /// Laplace transform `φ(s) = E e^{-sZ²}`; `φ(0) = 1` exactly.
    ///
    /// For very large `s` the result can underflow and is then clamped to 0.
    pub fn laplace(&self, s: f64) -> Result<f64> {
        check_s(s)?;
        if s == 0.0 {
            return Ok(1.0);
        }
        self.damped_moment(0, s)
    }

    /// `1 − φ(s) = E(1 − e^{-sZ²})`, integrated directly so that small `s`
    /// keeps full relative precision.
    pub fn one_minus_laplace(&self, s: f64) -> Result<f64> {
        check_s(s)?;
        if s == 0.0 {
            return Ok(0.0);
        }
        let v = self.symmetric_expectation(|t| -(-s * t * t).exp_m1(), self.spread(2, s))?;
        Ok(v.clamp(0.0, 1.0))
    }

    /// `ln φ(s)` evaluated as `ln(1 − (1 − φ))`.
    pub fn ln_laplace(&self, s: f64) -> Result<f64> {
        let q = self.one_minus_laplace(s)?;
        if q < 0.5 {
            Ok((-q).ln_1p())
        } else {
            Ok(self.laplace(s)?.ln())
        }
    }

    /// Damped moment `E Z^k e^{-sZ²}`, finite for every `k` once `s > 0`.
    /// Odd `k` returns 0 exactly by symmetry.
    pub fn damped_moment(&self, k: u32, s: f64) -> Result<f64> {
        check_s(s)?;
        if k % 2 == 1 {
            return Ok(0.0);
        }
        if s == 0.0 {
            if k == 0 {
                return Ok(1.0);
            }
            return Err(Error::Domain("damped moments with k > 0 need s > 0".into()));
        }
        let v = self.symmetric_expectation(|t| t.powi(k as i32) * (-s * t * t).exp(), self.spread(k, s))?;
        Ok(v.max(0.0))
    }
}

fn check_s(s: f64) -> Result<()> {
    if s >= 0.0 && s.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("Laplace argument must be finite and nonnegative, got {s}")))
    }
}

/// Prepared sampler for a [`Distribution`].
#[derive(Debug, Clone, Copy)]
pub enum Sampler {
    Gaussian,
    /// Ratio construction `N / sqrt(χ²_ν / ν)`.
    StudentT { chi: ChiSquared<f64>, dof: f64, scale: f64 },
    /// Inverse CDF `θ((1−u)^{-1/α} − 1)` times an independent sign.
    Pareto { inv_alpha: f64, theta: f64, scale: f64 },
}

impl Sampler {
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            Sampler::Gaussian => rng.sample(StandardNormal),
            Sampler::StudentT { chi, dof, scale } => {
                let n: f64 = rng.sample(StandardNormal);
                let c = rng.sample(chi);
                scale * n / (c / dof).sqrt()
            }
            Sampler::Pareto { inv_alpha, theta, scale } => {
                let u: f64 = rng.random();
                let magnitude = theta * ((1.0 - u).powf(-inv_alpha) - 1.0);
                let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
                scale * sign * magnitude
            }
        }
    }

    /// Fills `out` with i.i.d. draws.
    pub fn fill<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        for v in out {
            *v = self.draw(rng);
        }
    }
}

impl rand_distr::Distribution<f64> for Sampler {
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.draw(rng)
    }
}
