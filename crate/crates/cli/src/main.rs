//! `lana`: search, sweep and inspect latency-constrained architectures.
//!
//! Exit codes: 0 when at least one solution was produced, 1 on usage or
//! I/O errors, 2 when the budget admits no selection.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(name = "lana", version, about = "Latency-aware network transformation search")]
struct Cli {
    /// Worker threads for the solver and the random baseline (0 = one per core).
    #[arg(long, global = true, env = "LANA_THREADS", default_value_t = 0)]
    threads: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Parse and validate an instance file.
    Validate {
        instance: PathBuf,
    },
    /// Find up to K diverse architectures under a latency budget.
    Solve(SolveArgs),
    /// Best objective at each of several budget ratios (CSV).
    Sweep(SweepArgs),
    /// Rank the solutions of a report by proxy or measured score (CSV).
    Rank {
        report: PathBuf,
        instance: PathBuf,
        /// Measured-scores JSON; ranks by measured value and prints Kendall tau-b.
        #[arg(long)]
        measured: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Op usage histogram over the first solutions of a report (CSV).
    Stats {
        report: PathBuf,
        instance: PathBuf,
        #[arg(long, default_value_t = 100)]
        top: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Seeded random feasible architectures, compared against the solver.
    Random(RandomArgs),
    /// Solve with every layer restricted to the teacher and an identity op.
    Zeroshot(ZeroshotArgs),
    /// Write a synthetic instance.
    Generate(GenerateArgs),
}

#[derive(Args, Debug, Clone)]
#[group(required = true, multiple = false)]
struct BudgetArgs {
    /// Budget as a fraction of the teacher's latency.
    #[arg(long)]
    budget_ratio: Option<f64>,
    /// Budget in milliseconds.
    #[arg(long)]
    budget_ms: Option<f64>,
}

#[derive(Args, Debug, Clone)]
struct SearchArgs {
    /// Number of diverse solutions (capped at 100).
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    k: u64,
    /// Largest shared fraction of layers between two solutions.
    #[arg(long, default_value_t = 0.7)]
    overlap: f64,
    /// Seconds per solver call.
    #[arg(long, default_value_t = 60.0)]
    time_limit: f64,
}

#[derive(Args, Debug)]
struct SolveArgs {
    instance: PathBuf,
    #[command(flatten)]
    budget: BudgetArgs,
    #[command(flatten)]
    search: SearchArgs,
    /// Report path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write wall_time_s as 0 so reports are byte-reproducible.
    #[arg(long)]
    omit_timing: bool,
}

#[derive(Args, Debug)]
struct SweepArgs {
    instance: PathBuf,
    /// Comma-separated budget ratios.
    #[arg(long, value_delimiter = ',', required = true)]
    ratios: Vec<f64>,
    #[command(flatten)]
    search: SearchArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct RandomArgs {
    instance: PathBuf,
    #[command(flatten)]
    budget: BudgetArgs,
    /// Number of samples.
    #[arg(long, default_value_t = 1000)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Draws per sample before it counts as a failure.
    #[arg(long, default_value_t = 10_000)]
    max_attempts: u64,
    /// Seconds for the reference solver call.
    #[arg(long, default_value_t = 60.0)]
    time_limit: f64,
    /// Population CSV path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ZeroshotArgs {
    #[command(flatten)]
    solve: SolveArgs,
    #[arg(long, default_value = "identity")]
    identity_id: String,
    /// Keep teacher-only layers where the identity op is missing.
    #[arg(long)]
    allow_missing_identity: bool,
}

#[derive(Args, Debug)]
struct GenerateArgs {
    #[arg(long)]
    layers: usize,
    /// Ops per layer, teacher and identity included.
    #[arg(long)]
    ops: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Candidate op cost is drawn up to this multiple of the teacher's.
    #[arg(long, default_value_t = 1.2)]
    max_cost_ratio: f64,
    /// Share of candidate ops given a negative score delta.
    #[arg(long, default_value_t = 0.0)]
    negative_fraction: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match commands::run(cli.command, cli.threads) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
