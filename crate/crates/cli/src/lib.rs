//! Command line driver: simulate scans, map sample streams, evaluate maps
//! against ground truth and benchmark the masked update.

// `!(x > 0.0)` style checks are kept on purpose: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod commands;
pub mod config;
pub mod pipeline;

use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;

use clap::{Parser, Subcommand};
use thiserror::Error;

pub use config::RunConfig;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("evaluation empty: {0}")]
    EvaluationEmpty(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) => 3,
            CliError::EvaluationEmpty(_) => 4,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "surfmap", version, about = "Probabilistic height-grid mapping of freeform surfaces")]
pub struct Cli {
    /// TOML run configuration; defaults are used for anything not given.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Noise seed, overrides `noise.seed`.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory, overrides `output_dir`.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Update worker threads, overrides `workers` (0 = all cores).
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// More log output (-v warnings, -vv info, -vvv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate the configured raster scan and write the sample stream.
    Simulate {
        /// Stream path, `-` for stdout (default: <out>/samples.jsonl).
        #[arg(long)]
        stream: Option<PathBuf>,
    },
    /// Map a sample stream into height and covariance grids.
    Map {
        /// JSON-lines stream, `-` for stdin; without it the configured scan
        /// is simulated in memory.
        #[arg(long)]
        input: Option<PathBuf>,
        /// Map once per mask listed in `[compare]`.
        #[arg(long)]
        compare: bool,
    },
    /// Compare mapped grids against the configured ground-truth surface.
    Evaluate {
        /// Directory holding one subdirectory per mask (default: <out>).
        #[arg(long)]
        grids: Option<PathBuf>,
    },
    /// Time the masked update for single and multiple workers.
    Bench,
}

impl Cli {
    /// Loads the config file (or defaults) and applies the flag overrides.
    pub fn resolve_config(&self) -> Result<RunConfig, CliError> {
        let mut config = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        if let Some(seed) = self.seed {
            config.noise.seed = seed;
        }
        if let Some(out) = &self.out {
            config.output_dir = out.clone();
        }
        if let Some(workers) = self.workers {
            config.workers = workers;
        }
        Ok(config)
    }
}

/// Runs one subcommand; human-readable progress goes to `log`.
pub fn run(cli: &Cli, log: &mut dyn Write) -> Result<(), CliError> {
    let config = cli.resolve_config()?;
    match &cli.command {
        Command::Simulate { stream } => {
            commands::cmd_simulate(&config, stream.as_deref(), log)?;
        }
        Command::Map { input, compare } => {
            commands::cmd_map(&config, input.as_deref(), *compare, log)?;
        }
        Command::Evaluate { grids } => {
            commands::cmd_evaluate(&config, grids.as_deref(), log)?;
        }
        Command::Bench => {
            let dir = commands::prepare_output(&config)?;
            let report = bench::run_bench(&config)?;
            let path = dir.join("bench.csv");
            let mut csv = Vec::new();
            bench::write_bench_csv(&mut csv, &report).expect("writing to memory");
            fs::write(&path, csv).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
            bench::write_bench_table(&mut *log, &report).ok();
            if !report.identical {
                return Err(CliError::Data("multi-worker grids differ from the single-worker grid".into()));
            }
        }
    }
    Ok(())
}

/// Parses `args`, runs, and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            e.print().ok();
            return code;
        }
    };
    let level = match cli.verbose {
        0 => "error",
        1 => "warn",
        2 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .try_init()
        .ok();
    // progress must not mix with a sample stream on stdout
    let streaming = matches!(&cli.command, Command::Simulate { stream: Some(p) } if p.as_os_str() == "-");
    let result = if streaming {
        run(&cli, &mut io::stderr())
    } else {
        run(&cli, &mut io::stdout())
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("surfmap: {e}");
            e.exit_code()
        }
    }
}
