use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid user-facing configuration (bad distribution parameters, spec
    /// strings that do not parse, ...).
    #[error("configuration error: {0}")]
    Config(String),

    /// Input outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Caller broke a documented precondition (shape, symmetry, parity).
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("{what} did not converge (achieved {achieved:.3e}, target {target:.3e})")]
    NonConvergence {
        what: &'static str,
        achieved: f64,
        target: f64,
    },

    #[error("fixed point converged to a root outside the upper half plane: m = {re} + {im}i")]
    WrongBranch { re: f64, im: f64 },

    #[error("grid too coarse: continuous mass {mass:.6} vs expected {expected:.6}; widen or refine the grid")]
    GridTooCoarse { mass: f64, expected: f64 },

    #[error("value {value} lies outside [{lo}, {hi}] by more than the allowed margin")]
    Range { value: f64, lo: f64, hi: f64 },

    #[error("internal error: {0}")]
    Internal(String),

    #[error("csv error in {path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code used by the command line tool.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Contract(_) => 2,
            Error::NonConvergence { .. } | Error::WrongBranch { .. } | Error::GridTooCoarse { .. } => 3,
            _ => 1,
        }
    }
}
