//! `poprank` command-line tool.
//!
//! Exit codes: 0 success, 1 data error, 2 usage error, 3 non-convergence.

mod commands;
mod io;

use std::ops::RangeInclusive;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use poprank::engine::{alpha_grid, UpdateOrder};
use poprank::evaluate::{default_thresholds, RegressOn, TargetKind};

const EXIT_DATA: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_NOT_CONVERGED: u8 = 3;

#[derive(Parser, Debug)]
#[command(
    name = "poprank",
    version,
    about = "Rank pages and users of a bipartite interaction network"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Build the training matrix and test-window targets from raw files.
    Ingest(IngestArgs),
    /// Compute Impact and Engagement for one exponent.
    Rank(RankArgs),
    /// Prediction MSE of Impact and Popularity over a grid of exponents.
    Sweep(SweepArgs),
    /// Regress test-window activity on the Impact ranking.
    Predict(PredictArgs),
    /// Repeat the prediction for groups of polarized users.
    Polarize(PolarizeArgs),
    /// Write a synthetic dataset with planted page quality.
    Synth(SynthArgs),
}

#[derive(Args, Debug)]
struct IngestArgs {
    #[arg(long)]
    interactions: PathBuf,
    #[arg(long)]
    pages: PathBuf,
    /// Training months, inclusive, as `first:last`.
    #[arg(long, value_parser = parse_months)]
    train: RangeInclusive<u32>,
    /// Test months, inclusive, as `first:last`.
    #[arg(long, value_parser = parse_months)]
    test: RangeInclusive<u32>,
    /// Minimum comments per training month for a page to be kept (0 disables).
    #[arg(long, default_value_t = 5)]
    min_comments: u64,
    /// Keep a random sample of this many users.
    #[arg(long)]
    subsample: Option<usize>,
    #[arg(long, default_value_t = 0, requires = "subsample")]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum MatrixMode {
    /// Binarized revealed comparative advantage.
    Rca,
    /// Raw comment counts.
    Raw,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum OrderArg {
    Sequential,
    Jacobi,
}

impl From<OrderArg> for UpdateOrder {
    fn from(o: OrderArg) -> Self {
        match o {
            OrderArg::Sequential => UpdateOrder::Sequential,
            OrderArg::Jacobi => UpdateOrder::Jacobi,
        }
    }
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum TargetArg {
    ActivityOf,
    ActivityOn,
    NUsers,
}

impl From<TargetArg> for TargetKind {
    fn from(t: TargetArg) -> Self {
        match t {
            TargetArg::ActivityOf => TargetKind::ActivityOf,
            TargetArg::ActivityOn => TargetKind::ActivityOn,
            TargetArg::NUsers => TargetKind::NUsers,
        }
    }
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum RegressArg {
    Rank,
    Value,
}

impl From<RegressArg> for RegressOn {
    fn from(r: RegressArg) -> Self {
        match r {
            RegressArg::Rank => RegressOn::Rank,
            RegressArg::Value => RegressOn::Value,
        }
    }
}

/// Options shared by every command that runs the ranking.
#[derive(Args, Debug, Clone)]
struct EngineArgs {
    /// Output directory of `poprank ingest`.
    #[arg(long)]
    data: PathBuf,
    #[arg(long, value_enum, default_value = "rca")]
    input_matrix: MatrixMode,
    /// RCA values at or above this become 1.
    #[arg(long, default_value_t = 1.0)]
    rca_threshold: f64,
    #[arg(long, value_enum, default_value = "sequential")]
    update_order: OrderArg,
    #[arg(long, default_value_t = 1_000_000)]
    max_iterations: u64,
}

#[derive(Args, Debug)]
struct RankArgs {
    #[command(flatten)]
    engine: EngineArgs,
    #[arg(long, default_value_t = -0.5, allow_hyphen_values = true)]
    alpha: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[command(flatten)]
    engine: EngineArgs,
    /// Exponent grid as `start:end:step`, both ends inclusive.
    #[arg(long, default_value = "-2:1:0.25", value_parser = parse_grid, allow_hyphen_values = true)]
    alphas: AlphaGrid,
    #[arg(long, value_enum, default_value = "activity-of")]
    target: TargetArg,
    #[arg(long, value_enum, default_value = "rank")]
    regress_on: RegressArg,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct PredictArgs {
    #[command(flatten)]
    engine: EngineArgs,
    #[arg(long, default_value_t = -0.5, allow_hyphen_values = true)]
    alpha: f64,
    /// Target written to `scatter.csv`; `fit.json` covers all targets.
    #[arg(long, value_enum, default_value = "activity-of")]
    target: TargetArg,
    #[arg(long, value_enum, default_value = "rank")]
    regress_on: RegressArg,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct PolarizeArgs {
    #[command(flatten)]
    engine: EngineArgs,
    /// Interactions file; defaults to the one recorded by `ingest`.
    #[arg(long)]
    interactions: Option<PathBuf>,
    #[arg(long, default_value_t = -0.5, allow_hyphen_values = true)]
    alpha: f64,
    /// Comma-separated polarization thresholds.
    #[arg(long, value_delimiter = ',', default_values_t = default_thresholds())]
    thresholds: Vec<f64>,
    #[arg(long, value_enum, default_value = "rank")]
    regress_on: RegressArg,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct SynthArgs {
    /// Full generator configuration as JSON; the flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    users: Option<usize>,
    #[arg(long)]
    pages: Option<usize>,
    #[arg(long)]
    months: Option<u32>,
    #[arg(long)]
    reinforcement: Option<f64>,
    #[arg(long)]
    out: PathBuf,
}

fn parse_months(s: &str) -> Result<RangeInclusive<u32>, String> {
    let (a, b) = s.split_once(':').ok_or("expected `first:last`")?;
    let a: u32 = a
        .trim()
        .parse()
        .map_err(|e| format!("bad first month: {e}"))?;
    let b: u32 = b
        .trim()
        .parse()
        .map_err(|e| format!("bad last month: {e}"))?;
    if a < 1 || b < a {
        return Err(format!("empty or invalid month range {a}:{b}"));
    }
    Ok(a..=b)
}

#[derive(Clone, Debug)]
struct AlphaGrid(Vec<f64>);

fn parse_grid(s: &str) -> Result<AlphaGrid, String> {
    let parts: Vec<&str> = s.split(':').collect();
    let [start, end, step] = parts[..] else {
        return Err("expected `start:end:step`".into());
    };
    let num = |x: &str| {
        x.trim()
            .parse::<f64>()
            .map_err(|e| format!("bad number `{x}`: {e}"))
    };
    alpha_grid(num(start)?, num(end)?, num(step)?)
        .map(AlphaGrid)
        .map_err(|e| e.to_string())
}

fn thread_cap() -> Result<Option<usize>, String> {
    match std::env::var("POPRANK_THREADS") {
        Err(_) => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(Some(n)),
            _ => Err(format!(
                "POPRANK_THREADS must be a positive integer, got `{v}`"
            )),
        },
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let threads = match thread_cap() {
        Ok(t) => t,
        Err(msg) => {
            eprintln!("error: {msg}");
            return ExitCode::from(EXIT_USAGE);
        }
    };
    let result = poprank::par::with_thread_cap(threads, || commands::dispatch(cli.command));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<commands::NotConverged>().is_some() {
                ExitCode::from(EXIT_NOT_CONVERGED)
            } else {
                ExitCode::from(EXIT_DATA)
            }
        }
    }
}
