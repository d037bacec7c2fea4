//! Experiment descriptions and the parsers for their spec strings.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::heavy_tails::{DistKind, Distribution};
use crate::matrix_model::{two_atom, CovModel};
use crate::mp_law::GridSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Subcommand {
    Esd,
    KsCurve,
    Clt,
    MpCurve,
    Moments,
    Quadform,
}

impl Subcommand {
    pub fn name(self) -> &'static str {
        match self {
            Subcommand::Esd => "esd",
            Subcommand::KsCurve => "ks-curve",
            Subcommand::Clt => "clt",
            Subcommand::MpCurve => "mp-curve",
            Subcommand::Moments => "moments",
            Subcommand::Quadform => "quadform",
        }
    }

    /// Replication count used when none is given.
    pub fn default_reps(self) -> usize {
        match self {
            Subcommand::Esd => 200,
            Subcommand::KsCurve => 10,
            Subcommand::Clt => 1000,
            Subcommand::MpCurve => 1,
            Subcommand::Moments => 100_000,
            Subcommand::Quadform => 20_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

/// Population covariance as given on the command line.
#[derive(Debug, Clone, PartialEq)]
pub enum SigmaSpec {
    Identity,
    TwoAtom(f64, f64),
    File(PathBuf),
}

impl SigmaSpec {
    /// Parses `identity`, `two-atom`, `two-atom:v1,v2` or `file:PATH`.
    pub fn parse(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "identity" {
            return Ok(SigmaSpec::Identity);
        }
        if s == "two-atom" {
            return Ok(SigmaSpec::TwoAtom(1.2, 0.8));
        }
        if let Some(rest) = s.strip_prefix("two-atom:") {
            let vals: Vec<f64> = rest
                .split(',')
                .map(|v| v.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Config(format!("bad two-atom values {rest:?}: {e}")))?;
            if vals.len() != 2 || vals.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
                return Err(Error::Config(format!("two-atom needs two positive values, got {rest:?}")));
            }
            return Ok(SigmaSpec::TwoAtom(vals[0], vals[1]));
        }
        if let Some(path) = s.strip_prefix("file:") {
            if path.is_empty() {
                return Err(Error::Config("file: needs a path".into()));
            }
            return Ok(SigmaSpec::File(PathBuf::from(path)));
        }
        Err(Error::Config(format!(
            "unknown sigma spec {s:?}; expected identity, two-atom:v1,v2 or file:PATH"
        )))
    }

    pub fn build(&self, p: usize) -> Result<CovModel> {
        match self {
            SigmaSpec::Identity => CovModel::identity(p),
            SigmaSpec::TwoAtom(a, b) => two_atom(p, *a, *b).map_err(|e| Error::Config(e.to_string())),
            SigmaSpec::File(path) => {
                let cov = CovModel::from_csv(path)?;
                if cov.p() != p {
                    return Err(Error::Config(format!(
                        "{} holds a {}x{} matrix but p = {p}",
                        path.display(),
                        cov.p(),
                        cov.p()
                    )));
                }
                Ok(cov)
            }
        }
    }
}

/// Population distribution family as given on the command line.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistSpec {
    pub kind: DistKind,
    pub theta: f64,
}

impl DistSpec {
    /// Parses `t`, `gaussian`, `pareto` or `pareto:THETA`.
    pub fn parse(s: &str) -> Result<Self> {
        let s = s.trim();
        match s {
            "t" | "student-t" => Ok(Self {
                kind: DistKind::StudentT,
                theta: 1.0,
            }),
            "gaussian" | "normal" => Ok(Self {
                kind: DistKind::Gaussian,
                theta: 1.0,
            }),
            "pareto" => Ok(Self {
                kind: DistKind::SymmetrizedPareto,
                theta: 1.0,
            }),
            _ => {
                if let Some(rest) = s.strip_prefix("pareto:") {
                    let theta: f64 = rest
                        .trim()
                        .parse()
                        .map_err(|e| Error::Config(format!("bad Pareto scale {rest:?}: {e}")))?;
                    if !(theta > 0.0 && theta.is_finite()) {
                        return Err(Error::Config(format!("Pareto scale must be positive, got {theta}")));
                    }
                    return Ok(Self {
                        kind: DistKind::SymmetrizedPareto,
                        theta,
                    });
                }
                Err(Error::Config(format!(
                    "unknown distribution {s:?}; expected t, gaussian, pareto or pareto:THETA"
                )))
            }
        }
    }

    /// Builds the distribution; `standardized = None` standardizes whenever
    /// the variance is finite.
    pub fn build(&self, alpha: f64, standardized: Option<bool>) -> Result<Distribution> {
        let finite_var = self.kind == DistKind::Gaussian || alpha > 2.0;
        let std = standardized.unwrap_or(finite_var);
        let alpha = if self.kind == DistKind::Gaussian { f64::INFINITY } else { alpha };
        Distribution::new(self.kind, alpha, self.theta, std).map_err(|e| match e {
            Error::Config(m) | Error::Domain(m) | Error::Contract(m) => Error::Config(m),
            other => other,
        })
    }
}

/// One reproducible experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub subcommand: Subcommand,
    #[serde(default)]
    pub n: Option<usize>,
    #[serde(default)]
    pub p: Vec<usize>,
    #[serde(default)]
    pub alpha: Vec<f64>,
    #[serde(default)]
    pub y: Option<f64>,
    pub dist: String,
    pub sigma: String,
    pub reps: usize,
    pub seed: u64,
    pub out: PathBuf,
    #[serde(default)]
    pub format: OutputFormat,
    #[serde(default)]
    pub grid: Option<GridSpec>,
    pub bins: usize,
    #[serde(default)]
    pub exponents: Vec<u32>,
    #[serde(default)]
    pub standardized: Option<bool>,
}

impl ExperimentConfig {
    /// A configuration with the defaults of the command line tool.
    pub fn new(subcommand: Subcommand) -> Self {
        Self {
            subcommand,
            n: None,
            p: Vec::new(),
            alpha: Vec::new(),
            y: None,
            dist: "t".into(),
            sigma: "two-atom:1.2,0.8".into(),
            reps: subcommand.default_reps(),
            seed: 7,
            out: PathBuf::from("out"),
            format: OutputFormat::Csv,
            grid: None,
            bins: 50,
            exponents: vec![2, 2],
            standardized: None,
        }
    }

    pub fn dist_spec(&self) -> Result<DistSpec> {
        DistSpec::parse(&self.dist)
    }

    pub fn sigma_spec(&self) -> Result<SigmaSpec> {
        SigmaSpec::parse(&self.sigma)
    }

    /// `n` for dimension `p`: the explicit `n`, else `round(p/y)`.
    pub fn n_for(&self, p: usize) -> Result<usize> {
        match (self.n, self.y) {
            (Some(n), _) => Ok(n),
            (None, Some(y)) => {
                let n = (p as f64 / y).round();
                if n < 1.0 {
                    return Err(Error::Config(format!("p = {p} and y = {y} give n < 1")));
                }
                Ok(n as usize)
            }
            (None, None) => Err(Error::Config("either --n or --y is required".into())),
        }
    }

    /// Aspect ratio `y_n = p/n`.
    pub fn aspect(&self, p: usize) -> Result<f64> {
        Ok(p as f64 / self.n_for(p)? as f64)
    }

    fn single_p(&self) -> Result<usize> {
        match self.p.as_slice() {
            [p] => Ok(*p),
            _ => Err(Error::Config(format!(
                "{} takes exactly one --p, got {:?}",
                self.subcommand.name(),
                self.p
            ))),
        }
    }

    pub(crate) fn the_p(&self) -> Result<usize> {
        self.single_p()
    }

    pub(crate) fn the_alpha(&self) -> Result<f64> {
        match self.alpha.as_slice() {
            [a] => Ok(*a),
            [] if self.dist_spec()?.kind == DistKind::Gaussian => Ok(f64::INFINITY),
            _ => Err(Error::Config(format!(
                "{} takes exactly one --alpha, got {:?}",
                self.subcommand.name(),
                self.alpha
            ))),
        }
    }

    /// Alphas to loop over; Gaussian runs use a single infinite alpha.
    pub(crate) fn alphas(&self) -> Result<Vec<f64>> {
        if self.dist_spec()?.kind == DistKind::Gaussian {
            return Ok(vec![f64::INFINITY]);
        }
        if self.alpha.is_empty() {
            return Err(Error::Config("--alpha is required".into()));
        }
        Ok(self.alpha.clone())
    }

    /// Checks everything that can be checked without computing.
    pub fn validate(&self) -> Result<()> {
        let dist = self.dist_spec()?;
        let sigma = self.sigma_spec()?;
        if self.reps == 0 {
            return Err(Error::Config("reps must be at least 1".into()));
        }
        if self.n == Some(0) {
            return Err(Error::Config("n must be at least 1".into()));
        }
        if self.p.contains(&0) {
            return Err(Error::Config("p must be at least 1".into()));
        }
        if let Some(a) = self.alpha.iter().find(|a| !(**a > 0.0)) {
            return Err(Error::Config(format!("alpha must be positive, got {a}")));
        }
        if let Some(y) = self.y {
            if !(y > 0.0 && y.is_finite()) {
                return Err(Error::Config(format!("y must be positive, got {y}")));
            }
        }
        if self.bins < 10 {
            return Err(Error::Config(format!("bins must be at least 10, got {}", self.bins)));
        }
        if let Some(g) = &self.grid {
            if !(g.x_min >= 0.0 && g.x_max > g.x_min && g.points >= 100) {
                return Err(Error::Config(format!("invalid grid {g:?}")));
            }
        }
        let need_p = !matches!(self.subcommand, Subcommand::MpCurve);
        if need_p && self.p.is_empty() {
            return Err(Error::Config("--p is required".into()));
        }
        let multi_p = matches!(
            self.subcommand,
            Subcommand::KsCurve | Subcommand::Moments | Subcommand::Quadform
        );
        if need_p && !multi_p {
            self.single_p()?;
        }
        if matches!(sigma, SigmaSpec::File(_)) && self.p.len() > 1 {
            return Err(Error::Config("a covariance file fixes p; give a single --p".into()));
        }
        match self.subcommand {
            Subcommand::Esd | Subcommand::Clt => {
                self.the_alpha()?;
                self.n_for(self.single_p()?)?;
            }
            Subcommand::KsCurve => {
                self.alphas()?;
                for &p in &self.p {
                    self.n_for(p)?;
                }
            }
            Subcommand::MpCurve => {
                if self.y.is_none() && (self.n.is_none() || self.p.len() != 1) {
                    return Err(Error::Config("mp-curve needs --y, or --n with a single --p".into()));
                }
            }
            Subcommand::Moments => {
                self.alphas()?;
                if self.exponents.is_empty() || self.exponents.contains(&0) {
                    return Err(Error::Config("--exponents must be positive integers".into()));
                }
                if self.reps < 100 {
                    return Err(Error::Config("moments needs at least 100 reps".into()));
                }
            }
            Subcommand::Quadform => {
                self.alphas()?;
                if self.reps < 1000 {
                    return Err(Error::Config("quadform needs at least 1000 reps".into()));
                }
            }
        }
        if matches!(self.subcommand, Subcommand::Clt) {
            let a = self.the_alpha()?;
            let d = dist.build(a, Some(self.standardized.unwrap_or(true)))?;
            if d.tau().is_none() {
                return Err(Error::Config(format!(
                    "clt needs a finite fourth moment for its centering; alpha = {a} gives none"
                )));
            }
        } else {
            for a in self.alphas().unwrap_or_default() {
                dist.build(a, self.standardized)?;
            }
        }
        Ok(())
    }

    /// First 12 hex digits of the SHA-256 of the configuration without `out`.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.out = PathBuf::new();
        let bytes = serde_json::to_vec(&c).expect("config serializes");
        let digest = Sha256::digest(&bytes);
        digest.iter().take(6).map(|b| format!("{b:02x}")).collect()
    }

    /// `out/<subcommand>-<hash><suffix>`.
    pub fn output_path(&self, suffix: &str) -> PathBuf {
        self.out.join(format!("{}-{}{suffix}", self.subcommand.name(), self.hash()))
    }

    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let value: serde_json::Value = serde_json::from_str(&text)?;
        // Accept either a bare config or a run summary that echoes one.
        let config = value.get("config").cloned().unwrap_or(value);
        Ok(serde_json::from_value(config)?)
    }
}

/// Parses `x_min,x_max,points`.
pub fn parse_grid(s: &str) -> Result<GridSpec> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != 3 {
        return Err(Error::Config(format!("grid must be x_min,x_max,points, got {s:?}")));
    }
    let bad = |e: &dyn std::fmt::Display| Error::Config(format!("bad grid {s:?}: {e}"));
    Ok(GridSpec {
        x_min: parts[0].parse().map_err(|e| bad(&e))?,
        x_max: parts[1].parse().map_err(|e| bad(&e))?,
        points: parts[2].parse().map_err(|e| bad(&e))?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sigma_specs() {
        assert_eq!(SigmaSpec::parse("identity").unwrap(), SigmaSpec::Identity);
        assert_eq!(SigmaSpec::parse("two-atom:1.2,0.8").unwrap(), SigmaSpec::TwoAtom(1.2, 0.8));
        assert_eq!(SigmaSpec::parse("file:a.csv").unwrap(), SigmaSpec::File("a.csv".into()));
        for bad in ["", "two-atom:1", "two-atom:1,-2", "file:", "diag"] {
            assert!(matches!(SigmaSpec::parse(bad), Err(Error::Config(_))), "{bad}");
        }
    }

    #[test]
    fn dist_specs() {
        assert_eq!(DistSpec::parse("t").unwrap().kind, DistKind::StudentT);
        assert_eq!(DistSpec::parse("pareto:2.5").unwrap().theta, 2.5);
        assert!(DistSpec::parse("cauchy").is_err());
        assert!(DistSpec::parse("pareto:-1").is_err());
    }

    #[test]
    fn validation_catches_bad_input_early() {
        let mut c = ExperimentConfig::new(Subcommand::Esd);
        assert!(c.validate().is_err());
        c.p = vec![200];
        c.n = Some(400);
        c.alpha = vec![4.0];
        c.validate().unwrap();
        c.sigma = "two-atom:3".into();
        assert!(matches!(c.validate(), Err(Error::Config(_))));
        let mut clt = ExperimentConfig::new(Subcommand::Clt);
        clt.p = vec![10];
        clt.n = Some(10);
        clt.alpha = vec![2.0];
        assert!(matches!(clt.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn hash_ignores_output_directory() {
        let mut a = ExperimentConfig::new(Subcommand::Esd);
        let mut b = a.clone();
        b.out = PathBuf::from("elsewhere");
        assert_eq!(a.hash(), b.hash());
        a.seed = 8;
        assert_ne!(a.hash(), b.hash());
    }

    #[test]
    fn n_from_aspect() {
        let mut c = ExperimentConfig::new(Subcommand::KsCurve);
        c.y = Some(0.5);
        assert_eq!(c.n_for(200).unwrap(), 400);
        c.n = Some(30);
        assert_eq!(c.n_for(200).unwrap(), 30);
    }

    #[test]
    fn grid_parsing() {
        let g = parse_grid("0,3.5,500").unwrap();
        assert_eq!((g.x_min, g.x_max, g.points), (0.0, 3.5, 500));
        assert!(parse_grid("0,1").is_err());
    }
}
