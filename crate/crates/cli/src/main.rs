//! `yfwl`: fit focus coefficients through the partial regression, check the
//! result against the full regression, and benchmark the two paths.

mod bench;
mod commands;
mod data;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(name = "yfwl", version, about = "Partial-regression estimation with full-regression equivalence checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Estimate focus coefficients and their covariance from a CSV file.
    Fit(FitArgs),
    /// Run the identity suite over seeded random designs.
    Verify(VerifyArgs),
    /// Time the full k x k path against the partitioned path.
    Bench(BenchArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum InterceptArg {
    Controls,
    Focus,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EstimatorArg {
    Classical,
    Hc0,
    Hc1,
    Hc2,
    Hc3,
    Hc4,
    Hac,
    Cluster,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
pub enum ClusterDofArg {
    #[default]
    None,
    G,
    Gn,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
pub enum Hc4RuleArg {
    /// exponent max(4, N h / k)
    #[default]
    Max,
    /// exponent min(4, N h / k)
    Min,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
pub enum Format {
    #[default]
    Json,
    Table,
}

fn parse_list(s: &str) -> Result<String, String> {
    Ok(s.trim().to_string())
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// CSV file with a header row.
    #[arg(long)]
    pub input: PathBuf,
    /// Outcome column.
    #[arg(long, default_value = "y")]
    pub outcome: String,
    /// Focus regressors (comma separated).
    #[arg(long, value_delimiter = ',', value_parser = parse_list, required = true)]
    pub focus: Vec<String>,
    /// Control regressors partialled out (comma separated).
    #[arg(long, value_delimiter = ',', value_parser = parse_list)]
    pub controls: Vec<String>,
    /// Block that receives the column of ones.
    #[arg(long, value_enum, default_value_t = InterceptArg::Controls)]
    pub intercept: InterceptArg,
    #[arg(long, value_enum, default_value_t = EstimatorArg::Classical)]
    pub estimator: EstimatorArg,
    /// HAC bandwidth L (Bartlett weights); defaults to floor(4 (N/100)^(2/9)).
    #[arg(long)]
    pub hac_bandwidth: Option<usize>,
    /// Column holding cluster identifiers (compared as strings).
    #[arg(long)]
    pub cluster_col: Option<String>,
    #[arg(long, value_enum)]
    pub cluster_dof: Option<ClusterDofArg>,
    #[arg(long, value_enum)]
    pub hc4_rule: Option<Hc4RuleArg>,
    /// Also run the full regression and report the equivalence checks.
    #[arg(long)]
    pub check: bool,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    #[arg(long, default_value_t = 100)]
    pub instances: usize,
    /// Observations per instance.
    #[arg(long, default_value_t = 200)]
    pub n: usize,
    /// Largest inter-block correlation; 0.99 and above switches to the relaxed tolerance.
    #[arg(long, default_value_t = 0.9)]
    pub rho: f64,
    /// Override every per-identity tolerance.
    #[arg(long)]
    pub tolerance: Option<f64>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long, default_value_t = 2000)]
    pub n: usize,
    #[arg(long, default_value_t = 500)]
    pub k1: usize,
    #[arg(long, default_value_t = 500)]
    pub k2: usize,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = EstimatorArg::Classical)]
    pub estimator: EstimatorArg,
    /// Timing repetitions; the fastest run is reported.
    #[arg(long, default_value_t = 1)]
    pub repeats: usize,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result: Result<(), CliError> = match cli.command {
        Command::Fit(args) => commands::fit(&args),
        Command::Verify(args) => commands::verify(&args),
        Command::Bench(args) => bench::run(&args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("yfwl: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
