//! `dosefind`: decision tables, next-dose queries, simulations, design
//! comparisons, scenario export, sensitivity sweeps and the HTTP service.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "dosefind", version, about = "Interval-based dose-finding designs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Print the decision table for every (n, x) with n up to --max-n.
    Table(TableArgs),
    /// Decide the dose for the next cohort from the data at the current dose.
    Next(NextArgs),
    /// Simulate one design over a set of scenarios.
    Simulate(SimArgs),
    /// Simulate several designs side by side.
    Compare(CompareArgs),
    /// Export scenarios as TOML.
    Scenarios(ScenarioArgs),
    /// Sweep interval width or cohort size and summarize reliability.
    Sweep(SweepArgs),
    /// Run the HTTP service.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
struct IntervalArgs {
    /// Target toxicity probability.
    #[arg(long)]
    pt: f64,
    #[arg(long, default_value_t = 0.05)]
    eps_lo: f64,
    #[arg(long, default_value_t = 0.05)]
    eps_hi: f64,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum TableFormat {
    Grid,
    Csv,
    Json,
}

#[derive(Debug, Args)]
struct TableArgs {
    #[arg(long, default_value = "i3p3")]
    design: String,
    #[command(flatten)]
    interval: IntervalArgs,
    #[arg(long, default_value_t = 15, value_parser = clap::value_parser!(u32).range(1..=100))]
    max_n: u32,
    #[arg(long, default_value_t = 6)]
    n_doses: usize,
    #[arg(long, value_enum, default_value_t = TableFormat::Grid)]
    format: TableFormat,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct NextArgs {
    #[arg(long, default_value = "i3p3")]
    design: String,
    #[command(flatten)]
    interval: IntervalArgs,
    /// Patients treated at the current dose.
    #[arg(long)]
    n: u32,
    /// DLTs among them.
    #[arg(long)]
    x: u32,
    #[arg(long, default_value_t = 1)]
    dose: usize,
    #[arg(long, default_value_t = 6)]
    n_doses: usize,
    /// CSV with header `dose,n,x` giving data at the other doses.
    #[arg(long)]
    history_file: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ReportFormat {
    Text,
    Csv,
    Json,
}

#[derive(Debug, Args)]
struct RunArgs {
    /// `builtin:all`, `builtin:pt0.1`, `builtin:pt0.17`, `builtin:pt0.3`,
    /// `builtin:<id>` or a TOML scenario file.
    #[arg(long, default_value = "builtin:all")]
    scenarios: String,
    #[arg(long, default_value_t = 1000)]
    n_trials: u32,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 30)]
    max_patients: u32,
    /// A fixed size, or `random` for sizes drawn from 2..=5.
    #[arg(long, default_value = "3")]
    cohort_size: String,
    /// Interval half-widths, applied around each scenario's target.
    #[arg(long, default_value_t = 0.05)]
    eps_lo: f64,
    #[arg(long, default_value_t = 0.05)]
    eps_hi: f64,
    #[arg(long)]
    consecutive_stop: Option<u32>,
    /// Let the last fixed-size cohort shrink to fit --max-patients.
    #[arg(long)]
    truncate_final_cohort: bool,
    #[arg(long, value_enum, default_value_t = ReportFormat::Text)]
    format: ReportFormat,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SimArgs {
    #[arg(long, default_value = "i3p3")]
    design: String,
    #[command(flatten)]
    run: RunArgs,
}

#[derive(Debug, Args)]
struct CompareArgs {
    /// Comma-separated design names.
    #[arg(long, default_value = "i3p3,3p3,boin", value_delimiter = ',')]
    designs: Vec<String>,
    #[command(flatten)]
    run: RunArgs,
}

#[derive(Debug, Args)]
struct ScenarioArgs {
    #[arg(long, default_value = "builtin:all")]
    select: String,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Axis {
    Ei,
    Cohort,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[arg(long, value_enum)]
    axis: Axis,
    #[arg(long)]
    pt: f64,
    #[arg(long, default_value = "i3p3")]
    design: String,
    /// Defaults to the built-in scenarios at --pt.
    #[arg(long)]
    scenarios: Option<String>,
    /// Interval half-width for the cohort axis; defaults to 0.2 * pt.
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long, default_value_t = 1000)]
    n_trials: u32,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = ReportFormat::Text)]
    format: ReportFormat,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ServeArgs {
    /// Overrides DOSEFIND_DATA_DIR.
    #[arg(long)]
    data_dir: Option<PathBuf>,
    /// Overrides DOSEFIND_BIND.
    #[arg(long)]
    bind: Option<std::net::SocketAddr>,
    /// Overrides DOSEFIND_WORKERS.
    #[arg(long)]
    workers: Option<usize>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(commands::Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(commands::Failure::Runtime(err)) => {
            eprintln!("error: {err:#}");
            ExitCode::from(1)
        }
    }
}
