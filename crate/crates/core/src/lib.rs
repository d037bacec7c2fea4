//! Spectral analysis of spatial-sign covariance matrices (SCM) built from
//! heavy-tailed, α-regularly varying data.
//!
//! The crate is organised bottom-up:
//!
//! * [`heavy_tails`] samples Student-t, symmetrized Pareto and Gaussian
//!   populations and evaluates their Laplace transforms by quadrature.
//! * [`selfnorm`] computes moments of self-normalized vectors `Z/‖Z‖` both by
//!   Monte Carlo and through the Laplace-transform integral representation,
//!   together with the quadratic-form mean and covariance expansions.
//! * [`matrix_model`] holds population covariance models, data generation and
//!   the spatial-sign covariance matrix `B` itself.
//! * [`mp_law`] solves the generalized Marčenko–Pastur equation.
//! * [`spectra`] turns matrices into empirical spectral distributions and
//!   measures their distance to a limiting law.
//! * [`clt`] implements the central limit theorem for `tr(B²)`.
//! * [`experiments`] wires everything into reproducible, seeded runs that
//!   write CSV/JSON, and backs the `sscm` command line tool.

pub mod clt;
pub mod error;
pub mod experiments;
pub mod heavy_tails;
pub mod matrix_model;
pub mod mp_law;
pub mod quad;
pub mod rng;
pub mod selfnorm;
pub mod spectra;

pub use error::{Error, Result};
pub use heavy_tails::{DistKind, Distribution};
pub use matrix_model::{CovModel, SpectralDist};
pub use mp_law::{GridSpec, MpSolution};
pub use rng::{derive_stream, RandomStream};
