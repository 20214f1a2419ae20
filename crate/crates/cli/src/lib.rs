//! Command-line front end: argument parsing, TOML configuration, experiment
//! dispatch, and CSV/report output.
//!
//! Exit codes: 0 success, 1 usage error, 2 configuration error, 3 runtime
//! error (I/O, numerical failure).

use std::ffi::OsString;
use std::fs;
use std::path::PathBuf;

use clap::error::ErrorKind;
use clap::{Parser, ValueEnum};

pub mod config;
pub mod runner;

use config::{Experiment, Mode, RunConfig};

/// Positional action: an experiment to run, or `list`.
#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
#[value(rename_all = "snake_case")]
enum Action {
    List,
    RabiScan,
    TwoPulseScan,
    RamseyFringe,
    ContrastScan,
    PhaseVsDelay,
    DetectCalibrate,
}

impl Action {
    fn experiment(self) -> Option<Experiment> {
        match self {
            Action::List => None,
            Action::RabiScan => Some(Experiment::RabiScan),
            Action::TwoPulseScan => Some(Experiment::TwoPulseScan),
            Action::RamseyFringe => Some(Experiment::RamseyFringe),
            Action::ContrastScan => Some(Experiment::ContrastScan),
            Action::PhaseVsDelay => Some(Experiment::PhaseVsDelay),
            Action::DetectCalibrate => Some(Experiment::DetectCalibrate),
        }
    }
}

#[derive(Parser, Debug)]
#[command(
    name = "ionpulse",
    version,
    about = "Simulates ultrafast-pulse experiments on a trapped-ion hyperfine qubit",
    after_help = "Run `ionpulse list` to see the available experiments."
)]
struct Cli {
    /// Experiment to run (falls back to the config file's `experiment`).
    #[arg(value_enum)]
    action: Option<Action>,

    /// TOML configuration file; omitted sections use defaults.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Output directory for CSVs and reports (default: config `out_dir` or `out`).
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,

    /// Master seed, overriding the config.
    #[arg(long, value_name = "U64")]
    seed: Option<u64>,

    /// Report exact probabilities (no detection sampling).
    #[arg(long, conflicts_with = "sampled")]
    exact: bool,

    /// Simulate per-point detection histograms and fit them.
    #[arg(long)]
    sampled: bool,
}

pub fn run(args: impl IntoIterator<Item = OsString>) -> i32 {
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return code;
        }
    };

    let mut cfg = match &cli.config {
        None => RunConfig::default(),
        Some(path) => {
            let text = match fs::read_to_string(path) {
                Ok(text) => text,
                Err(e) => {
                    eprintln!("error: cannot read config {}: {e}", path.display());
                    return 2;
                }
            };
            match config::parse_config(&text) {
                Ok(cfg) => cfg,
                Err(e) => {
                    eprintln!("error: invalid config {}: {e}", path.display());
                    return 2;
                }
            }
        }
    };

    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if cli.exact {
        cfg.mode = Mode::Exact;
    }
    if cli.sampled {
        cfg.mode = Mode::Sampled;
    }

    if cli.action == Some(Action::List) {
        for e in Experiment::all() {
            println!("{:<16} {}", e.name(), e.describe());
        }
        return 0;
    }

    let experiment = match cli.action.and_then(Action::experiment).or(cfg.experiment) {
        Some(e) => e,
        None => {
            eprintln!(
                "error: no experiment given; pass one as an argument or set `experiment` in the config"
            );
            eprintln!("usage: ionpulse <experiment> [--config PATH] [--out DIR] [--seed U64] [--exact|--sampled]");
            return 1;
        }
    };

    let out_dir = cli
        .out
        .or_else(|| cfg.out_dir.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"));

    match runner::execute(&cfg, experiment, &out_dir) {
        Ok(files) => {
            for f in files {
                println!("wrote {}", f.display());
            }
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            3
        }
    }
}
