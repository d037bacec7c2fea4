//! Reproducible experiment runs: configuration, dispatch to the numerical
//! modules, and CSV/JSON persistence.
//!
//! Every random quantity is drawn from `derive_stream(seed, index)` with a
//! fixed index assignment, and all reductions happen in index order, so the
//! data files are byte-identical for any worker count.

mod config;

pub use config::{parse_grid, DistSpec, ExperimentConfig, OutputFormat, SigmaSpec, Subcommand};

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::RngCore;
use serde::Serialize;

use crate::clt::clt_experiment;
use crate::error::{Error, Result};
use crate::matrix_model::SpectralDist;
use crate::mp_law::{density_cdf, GridSpec, MpSolution};
use crate::rng::derive_stream;
use crate::selfnorm::{integral_moment, mc_moment, quadform_stats, random_symmetric, theoretical_cov, MomentSpec};
use crate::spectra::{histogram_deviation, histogram_in_range, kolmogorov_distance, median, simulate_esds};

/// Environment variable holding the number of worker threads.
pub const WORKERS_ENV: &str = "SSCM_WORKERS";

/// Summary of a finished run, also written as `<subcommand>-<hash>.json`.
#[derive(Debug, Clone, Serialize)]
pub struct RunResult {
    pub config: ExperimentConfig,
    pub metrics: BTreeMap<String, f64>,
    pub files: Vec<PathBuf>,
    pub wall_time_s: f64,
    pub version: String,
    pub seed: u64,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
    #[serde(skip_serializing_if = "serde_json::Value::is_null")]
    pub extra: serde_json::Value,
}

#[derive(Debug, Clone, PartialEq)]
enum Cell {
    Int(u64),
    Num(f64),
    Text(String),
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Int(v) => v.to_string(),
            // Shortest round-trip form, with an exponent for very small or large values.
            Cell::Num(v) => format!("{v:?}"),
            Cell::Text(s) => s.clone(),
        }
    }

    fn json(&self) -> serde_json::Value {
        match self {
            Cell::Int(v) => serde_json::json!(v),
            Cell::Num(v) => serde_json::json!(v),
            Cell::Text(s) => serde_json::json!(s),
        }
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as u64)
    }
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::Int(v)
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

/// One output table, written to `<subcommand>-<hash><suffix>.csv`.
#[derive(Debug, Clone)]
struct Table {
    suffix: &'static str,
    columns: Vec<&'static str>,
    rows: Vec<Vec<Cell>>,
}

impl Table {
    fn new(suffix: &'static str, columns: &[&'static str]) -> Self {
        Self {
            suffix,
            columns: columns.to_vec(),
            rows: Vec::new(),
        }
    }

    fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    fn to_csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let io = |e: csv::Error| Error::Internal(format!("csv encoding failed: {e}"));
        w.write_record(&self.columns).map_err(io)?;
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::csv)).map_err(io)?;
        }
        w.into_inner().map_err(|e| Error::Internal(format!("csv flush failed: {e}")))
    }

    fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "columns": self.columns,
            "rows": self.rows.iter().map(|r| r.iter().map(Cell::json).collect::<Vec<_>>()).collect::<Vec<_>>(),
        })
    }
}

struct Outcome {
    tables: Vec<Table>,
    metrics: BTreeMap<String, f64>,
    notes: Vec<String>,
    extra: serde_json::Value,
}

impl Outcome {
    fn new() -> Self {
        Self {
            tables: Vec::new(),
            metrics: BTreeMap::new(),
            notes: Vec::new(),
            extra: serde_json::Value::Null,
        }
    }
}

/// Worker count from [`WORKERS_ENV`], if set.
pub fn workers_from_env() -> Result<Option<usize>> {
    match std::env::var(WORKERS_ENV) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(Error::Config(format!("{WORKERS_ENV} must be a positive integer, got {v:?}"))),
        },
        Err(_) => Ok(None),
    }
}

/// Runs `config` with the worker count from the environment.
pub fn run(config: &ExperimentConfig) -> Result<RunResult> {
    run_with_workers(config, workers_from_env()?)
}

/// Runs `config` on a dedicated pool of `workers` threads (default: available
/// parallelism) and writes its outputs atomically.
pub fn run_with_workers(config: &ExperimentConfig, workers: Option<usize>) -> Result<RunResult> {
    config.validate()?;
    let start = Instant::now();
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(w) = workers {
        builder = builder.num_threads(w);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::Internal(format!("cannot start worker pool: {e}")))?;
    let outcome = pool.install(|| dispatch(config))?;
    let wall_time_s = start.elapsed().as_secs_f64();
    let mut result = RunResult {
        config: config.clone(),
        metrics: outcome.metrics,
        files: Vec::new(),
        wall_time_s,
        version: env!("CARGO_PKG_VERSION").to_string(),
        seed: config.seed,
        notes: outcome.notes,
        extra: outcome.extra,
    };
    let mut files: Vec<(PathBuf, Vec<u8>)> = Vec::new();
    match config.format {
        OutputFormat::Csv => {
            for t in &outcome.tables {
                files.push((config.output_path(&format!("{}.csv", t.suffix)), t.to_csv()?));
            }
        }
        OutputFormat::Json => {
            let data: serde_json::Map<String, serde_json::Value> = outcome
                .tables
                .iter()
                .map(|t| {
                    let key = t.suffix.trim_start_matches('-');
                    let key = if key.is_empty() { "data" } else { key };
                    (key.to_string(), t.to_json())
                })
                .collect();
            let mut extra = match result.extra.take() {
                serde_json::Value::Object(m) => m,
                _ => serde_json::Map::new(),
            };
            extra.insert("tables".into(), serde_json::Value::Object(data));
            result.extra = serde_json::Value::Object(extra);
        }
    }
    let summary_path = config.output_path(".json");
    result.files = files.iter().map(|f| f.0.clone()).collect();
    result.files.push(summary_path.clone());
    let summary = serde_json::to_vec_pretty(&result)?;
    files.push((summary_path, summary));
    write_all_atomic(&config.out, &files)?;
    Ok(result)
}

/// Stages every file in a temporary sibling and renames them only once all
/// contents are on disk.
fn write_all_atomic(dir: &Path, files: &[(PathBuf, Vec<u8>)]) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let mut staged = Vec::with_capacity(files.len());
    for (path, bytes) in files {
        let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
        tmp.write_all(bytes)?;
        tmp.as_file().sync_all()?;
        staged.push((tmp, path));
    }
    for (tmp, path) in staged {
        tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    }
    Ok(())
}

fn dispatch(config: &ExperimentConfig) -> Result<Outcome> {
    match config.subcommand {
        Subcommand::Esd => run_esd(config),
        Subcommand::KsCurve => run_ks_curve(config),
        Subcommand::Clt => run_clt(config),
        Subcommand::MpCurve => run_mp_curve(config),
        Subcommand::Moments => run_moments(config),
        Subcommand::Quadform => run_quadform(config),
    }
}

fn law_for(config: &ExperimentConfig, y: f64, h: &SpectralDist) -> Result<MpSolution> {
    let grid = config.grid.unwrap_or_else(|| GridSpec::default_for(y, h));
    density_cdf(y, h, grid)
}

/// Seed of cell `index` in a multi-cell run.
fn cell_seed(seed: u64, index: u64) -> u64 {
    derive_stream(seed, index).next_u64()
}

fn flag(b: bool) -> f64 {
    f64::from(u8::from(b))
}

fn run_esd(config: &ExperimentConfig) -> Result<Outcome> {
    let p = config.the_p()?;
    let n = config.n_for(p)?;
    let alpha = config.the_alpha()?;
    let dist = config.dist_spec()?.build(alpha, config.standardized)?;
    let cov = config.sigma_spec()?.build(p)?;
    let y = p as f64 / n as f64;
    let law = law_for(config, y, &cov.spectral_dist())?;
    let esds = simulate_esds(n, &cov, &dist, config.reps, config.seed)?;

    let mut spectra = Table::new("", &["replicate", "index", "eigenvalue"]);
    let mut ks = Vec::with_capacity(esds.len());
    for (r, e) in esds.iter().enumerate() {
        for (i, &v) in e.eigenvalues().iter().enumerate() {
            spectra.push(vec![r.into(), i.into(), v.into()]);
        }
        ks.push(kolmogorov_distance(e, &law, f64::INFINITY)?);
    }
    let (lo, hi) = (law.grid[0], law.grid[law.grid.len() - 1]);
    let hist = histogram_in_range(&esds, config.bins, lo, hi)?;
    let mut table = Table::new("-hist", &["bin_left", "bin_right", "count", "density"]);
    for b in 0..hist.counts.len() {
        table.push(vec![
            hist.edges[b].into(),
            hist.edges[b + 1].into(),
            hist.counts[b].into(),
            hist.density[b].into(),
        ]);
    }
    let binned: u64 = hist.counts.iter().sum();
    let mut out = Outcome::new();
    out.metrics.insert("y".into(), y);
    out.metrics.insert("histogram_deviation".into(), histogram_deviation(&hist, &law));
    out.metrics.insert("ks_median".into(), median(&ks));
    out.metrics.insert("fraction_outside_histogram".into(), 1.0 - binned as f64 / hist.total as f64);
    out.metrics.insert("law_max_residual".into(), law.max_residual);
    if alpha < 2.0 {
        out.notes.push(format!("alpha = {alpha} < 2: the spectrum is not expected to follow the limiting law"));
    }
    out.tables.push(spectra);
    out.tables.push(table);
    Ok(out)
}

fn run_ks_curve(config: &ExperimentConfig) -> Result<Outcome> {
    let alphas = config.alphas()?;
    let spec = config.dist_spec()?;
    let sigma = config.sigma_spec()?;
    let mut table = Table::new("", &["p", "n", "alpha", "replicate", "distance"]);
    let mut out = Outcome::new();
    for (pi, &p) in config.p.iter().enumerate() {
        let n = config.n_for(p)?;
        let cov = sigma.build(p)?;
        let law = law_for(config, p as f64 / n as f64, &cov.spectral_dist())?;
        for (ai, &alpha) in alphas.iter().enumerate() {
            let dist = spec.build(alpha, config.standardized)?;
            let seed = cell_seed(config.seed, (pi * alphas.len() + ai) as u64);
            let esds = simulate_esds(n, &cov, &dist, config.reps, seed)?;
            let mut ds = Vec::with_capacity(esds.len());
            for (r, e) in esds.iter().enumerate() {
                let d = kolmogorov_distance(e, &law, f64::INFINITY)?;
                table.push(vec![p.into(), n.into(), alpha.into(), r.into(), d.into()]);
                ds.push(d);
            }
            out.metrics.insert(format!("median_ks/p={p}/alpha={alpha}"), median(&ds));
        }
    }
    out.tables.push(table);
    Ok(out)
}

fn run_clt(config: &ExperimentConfig) -> Result<Outcome> {
    let p = config.the_p()?;
    let n = config.n_for(p)?;
    let alpha = config.the_alpha()?;
    let dist = config.dist_spec()?.build(alpha, Some(config.standardized.unwrap_or(true)))?;
    let cov = config.sigma_spec()?.build(p)?;
    let r = clt_experiment(n, &dist, &cov, config.reps, config.seed)?;
    let mut table = Table::new("", &["replicate", "statistic"]);
    for (i, &s) in r.statistics.iter().enumerate() {
        table.push(vec![i.into(), s.into()]);
    }
    let mut out = Outcome::new();
    for (k, v) in [
        ("mu", r.mu),
        ("sigma2", r.sigma2),
        ("center", r.center),
        ("tau", r.tau),
        ("sample_mean", r.sample_mean),
        ("sample_var", r.sample_var),
        ("ks_stat", r.ks_stat),
        ("ks_pass", flag(r.ks_pass)),
        ("ks_meaningful", flag(r.ks_meaningful)),
        ("within_theorem_range", flag(r.within_theorem_range)),
    ] {
        out.metrics.insert(k.into(), v);
    }
    if !r.within_theorem_range {
        out.notes.push(format!("alpha = {alpha} is outside the range alpha > 4 covered by the theorem"));
    }
    if !r.ks_meaningful {
        out.notes.push(format!("{} replications are too few for the KS threshold", config.reps));
    }
    out.extra = serde_json::json!({
        "mu": r.mu,
        "sigma2": r.sigma2,
        "sample_mean": r.sample_mean,
        "sample_var": r.sample_var,
        "ks_stat": r.ks_stat,
        "ks_pass": r.ks_pass,
    });
    out.tables.push(table);
    Ok(out)
}

fn run_mp_curve(config: &ExperimentConfig) -> Result<Outcome> {
    let p = config.p.first().copied();
    let y = match config.y {
        Some(y) => y,
        None => config.aspect(p.expect("validated"))?,
    };
    let sigma = config.sigma_spec()?;
    let dim = match (&sigma, p) {
        (_, Some(p)) => p,
        (SigmaSpec::TwoAtom(..), None) => 2,
        (_, None) => 1,
    };
    let h = sigma.build(dim)?.spectral_dist();
    let law = law_for(config, y, &h)?;
    let mut table = Table::new("", &["x", "density", "cdf"]);
    for i in 0..law.grid.len() {
        table.push(vec![law.grid[i].into(), law.density[i].into(), law.cdf[i].into()]);
    }
    let mut out = Outcome::new();
    out.metrics.insert("y".into(), y);
    out.metrics.insert("zero_atom".into(), law.zero_atom);
    out.metrics.insert("max_residual".into(), law.max_residual);
    out.metrics.insert("raw_mass".into(), law.raw_mass);
    out.extra = serde_json::json!({
        "y": y,
        "h_atoms": h.atoms(),
        "h_weights": h.weights(),
        "zero_atom": law.zero_atom,
        "max_residual": law.max_residual,
    });
    out.tables.push(table);
    Ok(out)
}

fn run_moments(config: &ExperimentConfig) -> Result<Outcome> {
    let alphas = config.alphas()?;
    let family = config.dist_spec()?;
    let label = config
        .exponents
        .iter()
        .map(u32::to_string)
        .collect::<Vec<_>>()
        .join(" ");
    let mut table = Table::new("", &["p", "alpha", "exponents", "method", "value", "stderr"]);
    for (pi, &p) in config.p.iter().enumerate() {
        let spec = MomentSpec::new(config.exponents.clone(), p).map_err(|e| Error::Config(e.to_string()))?;
        for (ai, &alpha) in alphas.iter().enumerate() {
            let dist = family.build(alpha, config.standardized)?;
            let mut rng = derive_stream(config.seed, (pi * alphas.len() + ai) as u64);
            let mc = mc_moment(&dist, &spec, config.reps, &mut rng)?;
            table.push(vec![
                p.into(),
                alpha.into(),
                label.clone().into(),
                "monte-carlo".to_string().into(),
                mc.value.into(),
                mc.stderr.into(),
            ]);
            if spec.all_even() {
                let v = integral_moment(&dist, &spec)?;
                table.push(vec![
                    p.into(),
                    alpha.into(),
                    label.clone().into(),
                    "integral".to_string().into(),
                    v.value.into(),
                    v.stderr.into(),
                ]);
            }
        }
    }
    let mut out = Outcome::new();
    out.tables.push(table);
    Ok(out)
}

fn run_quadform(config: &ExperimentConfig) -> Result<Outcome> {
    let alphas = config.alphas()?;
    let family = config.dist_spec()?;
    let mut table = Table::new(
        "",
        &[
            "p",
            "alpha",
            "tau",
            "mean",
            "mean_stderr",
            "trace_over_p",
            "var",
            "var_stderr",
            "var_theory",
        ],
    );
    for (pi, &p) in config.p.iter().enumerate() {
        let a = random_symmetric(p, &mut derive_stream(config.seed, (1u64 << 32) + pi as u64));
        let tr = (0..p).map(|i| a[(i, i)]).sum::<f64>() / p as f64;
        for (ai, &alpha) in alphas.iter().enumerate() {
            let dist = family.build(alpha, config.standardized)?;
            let mut rng = derive_stream(config.seed, (pi * alphas.len() + ai) as u64);
            let st = quadform_stats(&dist, p, a.as_ref(), a.as_ref(), config.reps, &mut rng)?;
            let tau = dist.tau().unwrap_or(f64::INFINITY);
            let theory = if tau.is_finite() {
                theoretical_cov(a.as_ref(), a.as_ref(), tau, p)
            } else {
                f64::NAN
            };
            table.push(vec![
                p.into(),
                alpha.into(),
                tau.into(),
                st.mean_a.into(),
                st.mean_a_stderr.into(),
                tr.into(),
                st.var_a.into(),
                st.var_a_stderr.into(),
                theory.into(),
            ]);
        }
    }
    let mut out = Outcome::new();
    out.tables.push(table);
    Ok(out)
}
