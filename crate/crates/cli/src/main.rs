mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::{Overrides, RunConfig};

/// Mine block I/O traces with sparse Poisson mixtures and replay them
/// through a preloading cache.
#[derive(Debug, Parser)]
#[command(name = "tracemix", version)]
struct Cli {
    /// TOML file with run settings; flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(flatten)]
    overrides: Overrides,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Aggregate a trace into count vectors and save them as an artifact.
    Aggregate {
        #[arg(long)]
        trace: PathBuf,
        /// Output directory.
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Fit a model on the learning part of a trace.
    Fit {
        #[arg(long)]
        trace: PathBuf,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Held-out log-likelihood of one or more models on the operating part.
    Eval {
        #[arg(long)]
        trace: PathBuf,
        #[arg(long = "model", required = true)]
        models: Vec<PathBuf>,
        /// Write the table here instead of stdout.
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Replay the operating part through LRU with and without preloading.
    Simulate {
        #[arg(long)]
        trace: PathBuf,
        #[arg(long)]
        model: PathBuf,
        /// Directory for the per-run report files.
        #[arg(long, short)]
        out: Option<PathBuf>,
        /// CSV of predicted clusters and preload volumes per slice.
        #[arg(long)]
        preload_log: Option<PathBuf>,
    },
    /// Write a synthetic trace with planted repeating patterns.
    Synth {
        /// TOML trace spec; defaults apply to missing keys.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long, short)]
        out: PathBuf,
    },
}

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Parse(String),
    Runtime(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Parse(_) => 3,
            CliError::Runtime(_) => 4,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Parse(m) => write!(f, "parse error: {m}"),
            CliError::Runtime(m) => write!(f, "error: {m}"),
        }
    }
}

impl From<tracemix_core::Error> for CliError {
    fn from(e: tracemix_core::Error) -> Self {
        use tracemix_core::Error as E;
        match e {
            E::Parse { .. } | E::EmptyTrace => CliError::Parse(e.to_string()),
            E::Config(_) | E::TooShort(_) => CliError::Config(e.to_string()),
            _ => CliError::Runtime(e.to_string()),
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let cfg = RunConfig::load(cli.config.as_deref(), &cli.overrides)?;
    match cli.command {
        Command::Aggregate { trace, out } => commands::aggregate(&cfg, &trace, &out),
        Command::Fit { trace, out } => commands::fit(&cfg, &trace, &out),
        Command::Eval { trace, models, out } => commands::eval(&cfg, &trace, &models, out.as_deref()),
        Command::Simulate {
            trace,
            model,
            out,
            preload_log,
        } => commands::simulate(&cfg, &trace, &model, out.as_deref(), preload_log.as_deref()),
        Command::Synth { spec, out } => commands::synth(&cfg, spec.as_deref(), &out),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("tracemix: {e}");
            ExitCode::from(e.code())
        }
    }
}
