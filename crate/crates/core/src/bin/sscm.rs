use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand as ClapSubcommand, ValueEnum};

use sscm::experiments::{parse_grid, run, ExperimentConfig, OutputFormat, Subcommand};

#[derive(Parser)]
#[command(name = "sscm", version, about = "Spatial-sign covariance experiments under heavy tails")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(ClapSubcommand)]
enum Command {
    /// Eigenvalues of B per replicate plus a pooled histogram.
    Esd(Common),
    /// Kolmogorov distance to the limiting law over a (p, alpha) grid.
    KsCurve(Common),
    /// Centered tr(B^2) per replicate and its normal approximation.
    Clt(Common),
    /// Density and distribution function of the limiting law.
    MpCurve(Common),
    /// Joint moments of self-normalized vectors.
    Moments(Common),
    /// Variance of quadratic forms in self-normalized vectors.
    Quadform(Common),
    /// Rerun a configuration from a JSON file (bare config or run summary).
    Replay {
        path: PathBuf,
        /// Write to this directory instead of the recorded one.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    n: Option<usize>,
    /// Dimension(s), comma separated.
    #[arg(long, value_delimiter = ',')]
    p: Vec<usize>,
    /// Tail index(es), comma separated.
    #[arg(long, value_delimiter = ',')]
    alpha: Vec<f64>,
    /// Aspect ratio p/n; used when --n is absent.
    #[arg(long)]
    y: Option<f64>,
    /// t | gaussian | pareto | pareto:THETA
    #[arg(long, default_value = "t")]
    dist: String,
    /// identity | two-atom:v1,v2 | file:PATH
    #[arg(long, default_value = "two-atom:1.2,0.8")]
    sigma: String,
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
    /// x_min,x_max,points
    #[arg(long)]
    grid: Option<String>,
    #[arg(long, default_value_t = 50)]
    bins: usize,
    /// Moment exponents, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "2,2")]
    exponents: Vec<u32>,
    /// Force standardization on or off.
    #[arg(long)]
    standardized: Option<bool>,
}

impl Common {
    fn into_config(self, sub: Subcommand) -> sscm::Result<ExperimentConfig> {
        let mut c = ExperimentConfig::new(sub);
        c.n = self.n;
        c.p = self.p;
        c.alpha = self.alpha;
        c.y = self.y;
        c.dist = self.dist;
        c.sigma = self.sigma;
        if let Some(r) = self.reps {
            c.reps = r;
        }
        c.seed = self.seed;
        c.out = self.out;
        c.format = match self.format {
            Format::Csv => OutputFormat::Csv,
            Format::Json => OutputFormat::Json,
        };
        c.grid = self.grid.as_deref().map(parse_grid).transpose()?;
        c.bins = self.bins;
        c.exponents = self.exponents;
        c.standardized = self.standardized;
        Ok(c)
    }
}

fn config_from(cli: Cli) -> sscm::Result<ExperimentConfig> {
    let (sub, common) = match cli.command {
        Command::Esd(c) => (Subcommand::Esd, c),
        Command::KsCurve(c) => (Subcommand::KsCurve, c),
        Command::Clt(c) => (Subcommand::Clt, c),
        Command::MpCurve(c) => (Subcommand::MpCurve, c),
        Command::Moments(c) => (Subcommand::Moments, c),
        Command::Quadform(c) => (Subcommand::Quadform, c),
        Command::Replay { path, out } => {
            let mut c = ExperimentConfig::from_json_file(&path)
                .map_err(|e| sscm::Error::Config(format!("{}: {e}", path.display())))?;
            if let Some(o) = out {
                c.out = o;
            }
            return Ok(c);
        }
    };
    common.into_config(sub)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = config_from(cli).and_then(|c| run(&c));
    match result {
        Ok(r) => {
            for f in &r.files {
                println!("{}", f.display());
            }
            for (k, v) in &r.metrics {
                eprintln!("{k} = {v}");
            }
            for note in &r.notes {
                eprintln!("note: {note}");
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("sscm: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
