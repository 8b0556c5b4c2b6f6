//! `prodsim` command-line driver.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Runtime(#[from] prodsim_core::Error),
    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Runtime(_) | CliError::Io { .. } => 2,
        }
    }
}

#[derive(Parser)]
#[command(name = "prodsim", version, about = "Recommender and opinion dynamics co-evolution experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Flags shared by every subcommand.
#[derive(Args, Debug, Clone)]
pub struct Common {
    /// TOML config file.
    #[arg(short = 'c', long = "config", value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Override one key, e.g. `--set mu=0.35` or `--set netgen.mu=0.35`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    /// Master seed (falls back to PRODSIM_SEED).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads, 0 = all cores.
    #[arg(long)]
    pub workers: Option<usize>,
    /// Use 500 replicas per cell.
    #[arg(long)]
    pub paper_scale: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a benchmark graph.
    Generate {
        #[command(flatten)]
        common: Common,
        /// Graph file to write; a manifest is written next to it.
        #[arg(short = 'o', long = "output", value_name = "FILE", default_value = "graph.txt")]
        output: PathBuf,
    },
    /// Run one simulation from a generated graph.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(short = 'o', long = "output-dir", value_name = "DIR", default_value = ".")]
        output_dir: PathBuf,
    },
    /// Evaluate the recommender over the (eta, mu) grid.
    Grid {
        #[command(flatten)]
        common: Common,
        #[arg(short = 'o', long = "output-dir", value_name = "DIR", default_value = ".")]
        output_dir: PathBuf,
    },
    /// Compute NCI and RWC for a graph file.
    Metrics {
        #[command(flatten)]
        common: Common,
        graph: PathBuf,
        /// Print a CSV row instead of key=value pairs.
        #[arg(long)]
        csv: bool,
    },
    /// Sweep intervention strategies and probabilities on one cell.
    Intervene {
        #[command(flatten)]
        common: Common,
        #[arg(short = 'o', long = "output-dir", value_name = "DIR", default_value = ".")]
        output_dir: PathBuf,
    },
}

const HELP_SECTIONS: &[(&str, &[&str])] = &[
    ("generate", &["general", "netgen"]),
    ("simulate", &["general", "netgen", "simulation", "recommender", "metrics"]),
    ("grid", &["general", "netgen", "simulation", "recommender", "metrics", "grid"]),
    ("metrics", &["general", "metrics"]),
    (
        "intervene",
        &["general", "netgen", "simulation", "recommender", "metrics", "grid", "intervene"],
    ),
];

fn command() -> clap::Command {
    let mut cmd = Cli::command();
    for (name, sections) in HELP_SECTIONS {
        cmd = cmd.mut_subcommand(*name, |c| c.after_help(config::key_help(sections)));
    }
    cmd
}

fn run() -> Result<(), CliError> {
    let matches = match command().try_get_matches() {
        Ok(m) => m,
        Err(e) => {
            use clap::error::ErrorKind;
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => Ok(()),
                _ => Err(CliError::Usage(String::new())),
            };
        }
    };
    let cli = Cli::from_arg_matches(&matches).map_err(|e| CliError::Usage(e.to_string()))?;
    match cli.command {
        Command::Generate { common, output } => commands::generate(&common, &output),
        Command::Simulate { common, output_dir } => commands::simulate(&common, &output_dir),
        Command::Grid { common, output_dir } => commands::grid(&common, &output_dir),
        Command::Metrics { common, graph, csv } => commands::metrics(&common, &graph, csv),
        Command::Intervene { common, output_dir } => commands::intervene(&common, &output_dir),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = e.to_string();
            if !msg.is_empty() {
                eprintln!("error: {msg}");
            }
            ExitCode::from(e.exit_code())
        }
    }
}
