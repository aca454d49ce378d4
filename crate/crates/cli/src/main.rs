mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use commands::Outcome;
use kersize_core::Error;

/// Accuracy bounds for inverse problems from sampled feasible sets.
#[derive(Debug, Parser)]
#[command(name = "kersize", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args, Clone, Default)]
pub struct NormArgs {
    /// Outer exponent p of the loss.
    #[arg(long)]
    pub p: Option<f64>,
    /// Inner coordinate norm: 1, 2 or inf.
    #[arg(long)]
    pub q: Option<String>,
    /// Zero-based signal coordinates the norm looks at, e.g. `0,1`.
    #[arg(long, value_delimiter = ',')]
    pub mask: Option<Vec<usize>>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Sample feasible sets for a batch of measurements.
    Sample {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        n_max: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Average kernel size of a collection.
    Kersize {
        dir: PathBuf,
        #[command(flatten)]
        norm: NormArgs,
        /// Report directory (defaults to the collection directory).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Loss of one set of predictions (`pred_<id>.csv` files).
    Loss {
        dir: PathBuf,
        predictions: PathBuf,
        /// Name to file the loss under (defaults to the directory name).
        #[arg(long)]
        name: Option<String>,
        #[command(flatten)]
        norm: NormArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check the bound inequalities for built-in and external maps.
    Validate {
        dir: PathBuf,
        predictions: Vec<PathBuf>,
        /// Exit with status 3 when any inequality flag fails.
        #[arg(long)]
        strict: bool,
        #[command(flatten)]
        norm: NormArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Symmetric kernel size of a dataset under a linear additive model.
    Skersize {
        dir: PathBuf,
        /// Model JSON (bare or inside a run configuration).
        #[arg(long, conflicts_with = "matrix", required_unless_present = "matrix")]
        config: Option<PathBuf>,
        /// Matrix CSV, one row per line; used with `--eps`.
        #[arg(long)]
        matrix: Option<PathBuf>,
        /// Additive noise bound for `--matrix`.
        #[arg(long, default_value_t = 0.0, requires = "matrix")]
        eps: f64,
        #[arg(long, value_enum, default_value_t = Mode::Signal)]
        mode: Mode,
        #[command(flatten)]
        norm: NormArgs,
        /// Output directory (defaults to `<dir>/skersize`).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a synthetic end-to-end experiment.
    Demo {
        name: String,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Measurements per setup (microscopy) or number of images (superres).
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        n_max: Option<usize>,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Mode {
    Signal,
    Joint,
}

fn configure_threads() -> Result<(), String> {
    let Ok(raw) = std::env::var("KERSIZE_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| format!("KERSIZE_THREADS must be a positive integer, got `{raw}`"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    if let Err(msg) = configure_threads() {
        eprintln!("error: {msg}");
        return ExitCode::from(1);
    }
    let result = match cli.command {
        Command::Sample { config, out, n_max, seed } => commands::sample(&config, out, n_max, seed),
        Command::Kersize { dir, norm, out } => commands::kersize(&dir, &norm, out),
        Command::Loss { dir, predictions, name, norm, out } => commands::loss(&dir, &predictions, name, &norm, out),
        Command::Validate { dir, predictions, strict, norm, out } => {
            commands::validate(&dir, &predictions, strict, &norm, out)
        }
        Command::Skersize { dir, config, matrix, eps, mode, norm, out } => {
            commands::skersize(&dir, config, matrix, eps, mode, &norm, out)
        }
        Command::Demo { name, out, seed, k, n_max } => commands::demo(&name, out, seed, k, n_max),
    };
    match result {
        Ok(Outcome::Ok) => ExitCode::SUCCESS,
        Ok(Outcome::Violation) => ExitCode::from(3),
        Err(e) => {
            eprintln!("error: {e}");
            let code = if e.is_usage() || matches!(e, Error::Unsupported(_)) { 1 } else { 2 };
            ExitCode::from(code)
        }
    }
}
