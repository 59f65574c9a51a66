//! Command-line front end.

mod config;
mod run;

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

pub use config::{
    parse_config, ChSpec, Command, ConvertSpec, CurveSpec, ExistenceSpec, ModelSpec, RunConfig,
    TransportSpec, DEFAULT_SEED, DEFAULT_STEPS, DEFAULT_TOL,
};
pub use run::{describe_error, run, Check, CliError, Outcome};

/// Environment variable selecting the log level: `off`, `info` or `debug`.
pub const LOG_ENV: &str = "FRECHET_GEO_LOG";

#[derive(Debug, Parser)]
#[command(name = "frechet-geo", version, about = "Geodesics, transport and structure checks on towers of finite-dimensional levels")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Sub,
}

#[derive(Debug, Subcommand)]
pub enum Sub {
    /// Integrate a geodesic and write `trajectory.csv`.
    Geodesic(RunArgs),
    /// Parallel-transport a vector along a curve and write `transport.csv`.
    Transport(RunArgs),
    /// Hessian, spray, dissection and chart-change checks on seeded random instances.
    ConvertCheck(RunArgs),
    /// Integrate on every tower level and report level-consistency residuals.
    TowerCheck(RunArgs),
    /// Evolve the spectral model `u_t = B_k(u, u)` and track its energy.
    Ch(RunArgs),
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// Key-value configuration file; defaults apply when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Overrides `seed`.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Overrides `tol`.
    #[arg(long)]
    pub tol: Option<f64>,
}

impl Sub {
    pub fn split(&self) -> (Command, &RunArgs) {
        match self {
            Sub::Geodesic(a) => (Command::Geodesic, a),
            Sub::Transport(a) => (Command::Transport, a),
            Sub::ConvertCheck(a) => (Command::ConvertCheck, a),
            Sub::TowerCheck(a) => (Command::TowerCheck, a),
            Sub::Ch(a) => (Command::Ch, a),
        }
    }
}

/// Reads the configuration, applies flag overrides and runs the command.
pub fn execute(command: Command, args: &RunArgs) -> Result<Outcome, CliError> {
    let text = match &args.config {
        Some(path) => fs::read_to_string(path).map_err(|source| CliError::Io {
            path: path.clone(),
            source,
        })?,
        None => String::new(),
    };
    let mut config = parse_config(&text)?;
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(tol) = args.tol {
        if !(tol > 0.0 && tol.is_finite()) {
            return Err(CliError::Usage(format!("--tol must be positive, got {tol}")));
        }
        config.tol = tol;
    }
    run(command, &config, &args.out)
}

fn init_logging() {
    let level = match std::env::var(LOG_ENV).as_deref() {
        Ok("off") => log::LevelFilter::Off,
        Ok("info") => log::LevelFilter::Info,
        Ok("debug") => log::LevelFilter::Debug,
        _ => log::LevelFilter::Warn,
    };
    let _ = env_logger::Builder::new()
        .filter_level(level)
        .format_timestamp(None)
        .try_init();
}

/// Exit status 0 when every check passes, 1 when a check fails and 2 on
/// errors.
pub fn main_entry() -> ExitCode {
    init_logging();
    let cli = Cli::parse();
    let (command, args) = cli.command.split();
    match execute(command, args) {
        Ok(outcome) => {
            for c in &outcome.checks {
                println!(
                    "{} {}: {:e} (tol {:e})",
                    if c.passed() { "PASS" } else { "FAIL" },
                    c.name,
                    c.value,
                    c.tol
                );
            }
            for f in &outcome.files {
                println!("wrote {}", f.display());
            }
            if outcome.passed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {}", describe_error(&e));
            ExitCode::from(2)
        }
    }
}
