//! `par`: simulate, fit and benchmark Poisson autoregressive count models.

mod commands;
mod error;
mod results;
mod settings;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use par_core::harness::EstimatorSet;
use par_core::{CovariateLaw, TableId};

use crate::error::CliError;

#[derive(Parser)]
#[command(name = "par", version, about = "Poisson autoregressive count models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one PAR(p) series and its covariates.
    Simulate(SimulateArgs),
    /// Fit one series with the hybrid and/or baseline estimator.
    Fit(FitArgs),
    /// Fit several series with a shared autoregressive coefficient.
    FitMulti(FitMultiArgs),
    /// Monte Carlo study of one scenario.
    Experiment(ExperimentArgs),
    /// Regenerate a simulation table next to its reference values.
    RunTable(RunTableArgs),
    /// Turn daily quotes into monthly up-day counts per market.
    Ingest(IngestArgs),
    /// Re-render the outputs of an earlier run directory.
    Report(ReportArgs),
}

#[derive(Args)]
pub struct SimulateArgs {
    /// Autoregressive coefficients, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub rho: Option<Vec<f64>>,
    /// Covariate effects, comma separated; none by default.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub delta: Option<Vec<f64>>,
    /// Log reversion level [default: ln 100].
    #[arg(long, allow_negative_numbers = true)]
    pub delta0: Option<f64>,
    /// Lag order; must match the number of coefficients.
    #[arg(long)]
    pub p: Option<usize>,
    /// Series length [default: 100].
    #[arg(long = "T", value_name = "T")]
    pub t_len: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// uniform, normal or poisson [default: normal].
    #[arg(long)]
    pub covariate_law: Option<CovariateLaw>,
    /// Coefficients in force during a centered change window.
    #[arg(long, value_delimiter = ',')]
    pub change_rho: Option<Vec<f64>>,
    /// Share of the series covered by the change window.
    #[arg(long)]
    pub change_fraction: Option<f64>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Args)]
pub struct FitArgs {
    /// Series file.
    #[arg(long)]
    pub series: Option<PathBuf>,
    /// Covariate file aligned with the series; none if omitted.
    #[arg(long)]
    pub covariates: Option<PathBuf>,
    /// Lag order [default: 1].
    #[arg(long)]
    pub p: Option<usize>,
    /// hybrid, baseline or both [default: hybrid].
    #[arg(long)]
    pub estimator: Option<EstimatorSet>,
    /// Seed for the baseline's jittered starts [default: 0].
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Args)]
pub struct FitMultiArgs {
    /// Directory of `<label>.series.csv` / `<label>.covariates.csv` pairs, as written by `ingest`.
    #[arg(long, conflicts_with_all = ["series", "covariates"])]
    pub dir: Option<PathBuf>,
    /// Series files.
    #[arg(long, num_args = 1..)]
    pub series: Option<Vec<PathBuf>>,
    /// One covariate file per series, in the same order.
    #[arg(long, num_args = 1..)]
    pub covariates: Option<Vec<PathBuf>>,
    /// Seed for the bootstrap pooling [default: 0].
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Args)]
pub struct ExperimentArgs {
    #[arg(long)]
    pub rho: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub delta: Option<f64>,
    /// [default: normal]
    #[arg(long)]
    pub covariate_law: Option<CovariateLaw>,
    /// [default: 100]
    #[arg(long = "T", value_name = "T")]
    pub t_len: Option<usize>,
    /// [default: 200]
    #[arg(long)]
    pub replicates: Option<usize>,
    /// hybrid, baseline or both [default: both].
    #[arg(long)]
    pub estimator: Option<EstimatorSet>,
    #[arg(long)]
    pub change_rho: Option<f64>,
    #[arg(long)]
    pub change_fraction: Option<f64>,
    /// Panel size; turns the scenario into a shared-coefficient panel.
    #[arg(long)]
    pub n_series: Option<usize>,
    /// SD of the panel's reversion levels [default: 10].
    #[arg(long)]
    pub reversion_sd: Option<f64>,
    /// Allow values outside the published grids.
    #[arg(long)]
    pub custom: bool,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Args)]
pub struct RunTableArgs {
    /// T2..T10, T12, T13 or T14.
    pub table: Option<TableId>,
    /// Fraction of the 200 replicates to run [default: 1].
    #[arg(long)]
    pub scale: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Args)]
pub struct IngestArgs {
    /// Daily quotes with header `date,market,open,close`.
    #[arg(long)]
    pub quotes: Option<PathBuf>,
    /// Daily covariate with header `date,<name>`.
    #[arg(long)]
    pub covariate: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Args)]
pub struct ReportArgs {
    /// Run directory containing `manifest.json` and `results.json`.
    pub dir: PathBuf,
    /// Fail unless the re-rendered text matches the stored `report.txt`.
    #[arg(long)]
    pub check: bool,
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Simulate(a) => commands::simulate(a),
        Command::Fit(a) => commands::fit(a),
        Command::FitMulti(a) => commands::fit_multi(a),
        Command::Experiment(a) => commands::experiment(a),
        Command::RunTable(a) => commands::run_table(a),
        Command::Ingest(a) => commands::ingest(a),
        Command::Report(a) => commands::report(a),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
