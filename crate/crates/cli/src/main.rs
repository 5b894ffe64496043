mod config;
mod experiments;
mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use serde_json::json;

use crate::experiments::BoundsRequest;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error{}: key `{key}`: {message}", line.map(|l| format!(" at line {l}")).unwrap_or_default())]
    Config { line: Option<usize>, key: String, message: String },

    #[error("config error: {0}")]
    Parse(String),

    #[error("{0}")]
    Usage(String),

    #[error(transparent)]
    Core(#[from] mcqmc::Error),

    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config { .. } | CliError::Parse(_) | CliError::Usage(_) => 2,
            CliError::Core(
                mcqmc::Error::Unsupported(_) | mcqmc::Error::CoverUnreachable { .. } | mcqmc::Error::Precondition { .. },
            ) => 3,
            _ => 1,
        }
    }
}

#[derive(Parser)]
#[command(name = "mcqmc", version, about = "Markov chain quasi-Monte Carlo experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a config file.
    Run { config: PathBuf },
    /// Check a config file without running it.
    Validate { config: PathBuf },
    /// Print the bound table as CSV.
    Bounds {
        #[arg(long, default_value_t = 1)]
        d: usize,
        #[arg(long)]
        n: u64,
        /// Log-Lipschitz constant; adds the ball-walk rows and, without
        /// --lambda0, takes Λ₀ from the ball-walk gap bound.
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        lambda0: Option<f64>,
        /// ‖dν/dπ‖₂
        #[arg(long, default_value_t = 1.0)]
        norm: f64,
        #[arg(long)]
        delta: Option<f64>,
        #[arg(long, default_value_t = 0.25)]
        epsilon: f64,
    },
}

fn configure_threads() -> Result<Option<usize>, CliError> {
    let Ok(raw) = std::env::var("MCQMC_THREADS") else { return Ok(None) };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|n| *n >= 1)
        .ok_or_else(|| CliError::Usage(format!("MCQMC_THREADS must be a positive integer, got {raw:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Usage(format!("cannot size the worker pool: {e}")))?;
    Ok(Some(n))
}

fn load(path: &Path) -> Result<config::Plan, CliError> {
    let source = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
    config::parse(&source, path)
}

fn run(path: &Path, threads: Option<usize>) -> Result<(), CliError> {
    let plan = load(path)?;
    let start = Instant::now();
    let outcome = experiments::run(&plan)?;
    let csv = outcome.table.to_csv()?;
    let wall_ms = start.elapsed().as_secs_f64() * 1e3;
    let manifest = json!({
        "config": plan.config,
        "config_path": path.display().to_string(),
        "experiment": plan.config.experiment.to_string(),
        "versions": { "mcqmc": env!("CARGO_PKG_VERSION") },
        "seeds": plan.seeds,
        "gamma": plan.gamma.map(|g| json!({ "resolved": g, "from_gamma_star": plan.gamma_from_keyword })),
        "objective": plan.objective.to_string(),
        "columns": outcome.table.header,
        "rows": outcome.table.rows.len(),
        "row_runtime_ms": outcome.row_runtime_ms,
        "summary": outcome.summary,
        "threads": threads.unwrap_or_else(rayon::current_num_threads),
        "wall_time_ms": wall_ms,
        "output": plan.output.display().to_string(),
    });
    output::write_atomic(&plan.output, &csv)?;
    let text = serde_json::to_string_pretty(&manifest).expect("manifest is plain JSON");
    output::write_atomic(&plan.manifest_path(), text.as_bytes())?;
    println!("wrote {} ({} rows) and {}", plan.output.display(), outcome.table.rows.len(), plan.manifest_path().display());
    Ok(())
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    let threads = configure_threads()?;
    match cli.command {
        Command::Run { config } => run(&config, threads),
        Command::Validate { config } => {
            let plan = load(&config)?;
            println!("ok: {} experiment, output {}", plan.config.experiment, plan.output.display());
            Ok(())
        }
        Command::Bounds { d, n, alpha, lambda0, norm, delta, epsilon } => {
            if d == 0 || n == 0 {
                return Err(CliError::Usage("--d and --n must be positive".into()));
            }
            let lambda0 = match (lambda0, alpha) {
                (Some(l), _) => l,
                (None, Some(a)) => 1.0 - mcqmc::bounds::ballwalk_gap_bound(a, d)?.1,
                (None, None) => 0.0,
            };
            let table = experiments::bounds_table(&BoundsRequest { d, n, alpha, lambda0, norm, delta, epsilon })?;
            print!("{}", String::from_utf8(table.to_csv()?).expect("csv is utf-8"));
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("mcqmc: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
