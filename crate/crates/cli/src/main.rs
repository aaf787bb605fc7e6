//! Command-line front end: witness evaluation, parameter sweeps, threshold
//! searches and the sample/estimate pipeline.
//!
//! Exit codes: 0 when the command ran (whatever the verdict), 1 on a
//! numerical or I/O failure, 2 on a configuration error, 3 when a threshold
//! search finds no crossing.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::config::Grid;

#[derive(Debug)]
pub enum CliError {
    Config(String),
    NoCrossing(String),
    Run(String),
}

impl CliError {
    pub fn message(&self) -> &str {
        match self {
            CliError::Config(m) | CliError::NoCrossing(m) | CliError::Run(m) => m,
        }
    }

    fn code(&self) -> u8 {
        match self {
            CliError::Run(_) => 1,
            CliError::Config(_) => 2,
            CliError::NoCrossing(_) => 3,
        }
    }
}

impl From<cvwitness::Error> for CliError {
    fn from(e: cvwitness::Error) -> Self {
        use cvwitness::Error as E;
        match e {
            E::Parse { .. }
            | E::InvalidParameter(_)
            | E::PairMismatch { .. }
            | E::InsufficientSamples { .. } => CliError::Config(e.to_string()),
            E::NoCrossing { .. } => CliError::NoCrossing(e.to_string()),
            other => CliError::Run(other.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "cvwitness",
    version,
    about = "Fourth-order cumulant inseparability witness for two-mode CV states"
)]
struct Cli {
    /// Plain-text `key=value` file supplying defaults for any flag.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args, Clone)]
struct StateArgs {
    /// State descriptor, e.g. `split-phssv:r=1,eta=0.8`.
    #[arg(long)]
    state: Option<String>,
    /// EPR operator pair `g1,g2,h1,h2`.
    #[arg(long, allow_hyphen_values = true)]
    pair: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SweepVar {
    Eta,
    R,
}

impl SweepVar {
    pub fn name(self) -> &'static str {
        match self {
            SweepVar::Eta => "eta",
            SweepVar::R => "r",
        }
    }
}

impl std::str::FromStr for SweepVar {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        <SweepVar as ValueEnum>::from_str(s, false)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CriterionArg {
    Fourth,
    Duan,
}

impl std::str::FromStr for CriterionArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        <CriterionArg as ValueEnum>::from_str(s, false)
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Evaluate both criteria on one state.
    Witness {
        #[command(flatten)]
        state: StateArgs,
        /// Also write the reports as CSV.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Tabulate both criteria over a grid of `eta` or `r`.
    Sweep {
        #[command(flatten)]
        state: StateArgs,
        #[arg(long, value_enum)]
        var: Option<SweepVar>,
        /// `start:stop:step`
        #[arg(long)]
        grid: Option<Grid>,
        /// CSV destination; stdout when absent.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Locate the zero crossing of a criterion margin by bisection.
    Threshold {
        #[command(flatten)]
        state: StateArgs,
        #[arg(long, value_enum)]
        var: Option<SweepVar>,
        #[arg(long)]
        lo: Option<f64>,
        #[arg(long)]
        hi: Option<f64>,
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long, value_enum)]
        criterion: Option<CriterionArg>,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Draw homodyne and heterodyne samples into xx/pp/het1/het2 CSV files.
    Sample {
        #[command(flatten)]
        state: StateArgs,
        /// Samples per file (at least 10⁴).
        #[arg(long)]
        samples: Option<usize>,
        /// RNG seed; falls back to `WITNESS_SEED`, then 0.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Estimate the cumulant set and verdicts from sample files.
    Estimate {
        /// Directory holding xx.csv, pp.csv, het1.csv and het2.csv.
        #[arg(long)]
        dir: Option<PathBuf>,
        #[arg(long, allow_hyphen_values = true)]
        pair: Option<String>,
    },
    /// Compare the phase-space engine with the truncated Fock-space oracle.
    #[command(hide = true)]
    Oracle {
        #[command(flatten)]
        state: StateArgs,
        #[arg(long)]
        cutoff: Option<usize>,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    let cfg = match &cli.config {
        Some(p) => config::ConfigFile::load(p)?,
        None => config::ConfigFile::default(),
    };
    match cli.command {
        Command::Witness { state, output } => {
            let s = commands::resolve_state(&cfg, &state)?;
            commands::witness(&s, cfg.pick(output, "output")?)
        }
        Command::Sweep {
            state,
            var,
            grid,
            output,
        } => {
            let s = commands::resolve_state(&cfg, &state)?;
            let var = cfg
                .pick(var, "var")?
                .ok_or_else(|| CliError::Config("sweep needs --var".into()))?;
            let grid = cfg
                .pick(grid, "grid")?
                .ok_or_else(|| CliError::Config("sweep needs --grid".into()))?;
            commands::sweep(&s, var, &grid, cfg.pick(output, "output")?)
        }
        Command::Threshold {
            state,
            var,
            lo,
            hi,
            tol,
            criterion,
            output,
        } => {
            let s = commands::resolve_state(&cfg, &state)?;
            let var = cfg
                .pick(var, "var")?
                .ok_or_else(|| CliError::Config("threshold needs --var".into()))?;
            let search = commands::Search {
                var,
                lo: cfg.pick(lo, "lo")?.unwrap_or(0.05),
                hi: cfg.pick(hi, "hi")?.unwrap_or(1.0),
                tol: cfg.pick(tol, "tol")?.unwrap_or(1e-4),
                criterion: cfg
                    .pick(criterion, "criterion")?
                    .unwrap_or(CriterionArg::Fourth),
            };
            commands::threshold(&s, &search, cfg.pick(output, "output")?)
        }
        Command::Sample {
            state,
            samples,
            seed,
            out_dir,
        } => {
            let s = commands::resolve_state(&cfg, &state)?;
            let samples = cfg
                .pick(samples, "samples")?
                .ok_or_else(|| CliError::Config("sample needs --samples".into()))?;
            let seed = match cfg.pick(seed, "seed")? {
                Some(v) => v,
                None => match std::env::var("WITNESS_SEED") {
                    Ok(v) => v.trim().parse().map_err(|_| {
                        CliError::Config(format!("WITNESS_SEED `{v}` is not an unsigned integer"))
                    })?,
                    Err(_) => 0,
                },
            };
            let dir = cfg
                .pick(out_dir, "out-dir")?
                .ok_or_else(|| CliError::Config("sample needs --out-dir".into()))?;
            commands::sample(&s, samples, seed, &dir)
        }
        Command::Estimate { dir, pair } => {
            let dir = cfg
                .pick(dir, "dir")?
                .ok_or_else(|| CliError::Config("estimate needs --dir".into()))?;
            let pair = commands::parse_pair(cfg.pick(pair, "pair")?.as_deref())?;
            commands::estimate(&dir, pair)
        }
        Command::Oracle { state, cutoff } => {
            let s = commands::resolve_state(&cfg, &state)?;
            commands::oracle(&s, cfg.pick(cutoff, "cutoff")?)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}
