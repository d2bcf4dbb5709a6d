//! `bigsample` command-line tool.
//!
//! Exit codes: 0 on success, 2 for usage errors (unknown or missing flags,
//! invalid values), 1 when an estimator or loader fails at run time.

mod diagnose;
mod estimate;
mod output;
mod simulate;

use std::path::PathBuf;
use std::process::ExitCode;

use bigsample::sim::Scenario;
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Runtime(#[from] bigsample::Error),
}

pub type CliResult<T> = Result<T, CliError>;

#[derive(Parser, Debug)]
#[command(name = "bigsample", version, about = "Selection-bias correction for big non-probability samples")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run a Monte Carlo simulation study and report bias, SE, RB.SE and CR.
    Simulate {
        #[command(subcommand)]
        study: Study,
    },
    /// Run one estimator on CSV data.
    Estimate(EstimateArgs),
    /// Diagnostics on a population and a big-data sample.
    Diagnose {
        #[command(subcommand)]
        what: Diagnostic,
    },
}

#[derive(Subcommand, Debug)]
enum Study {
    /// Naive, calibration and inverse sampling estimators under logit p = phi (x - 2).
    Study1(Study1Args),
    /// Naive, Rivers, PS and DR estimators with an auxiliary probability sample.
    Study2(Study2Args),
}

#[derive(Args, Debug, Clone, Default)]
pub struct CommonSimArgs {
    /// Sample size n (second phase in study1, probability sample A in study2).
    #[arg(long)]
    pub n: Option<usize>,
    /// Population size N.
    #[arg(long = "pop-size")]
    pub pop_size: Option<usize>,
    /// Monte Carlo replications.
    #[arg(long)]
    pub reps: Option<usize>,
    /// Master seed; fixes every replication.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Write the CSV here (atomically) in addition to standard output.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker threads (default: available parallelism). Output does not depend on it.
    #[arg(long)]
    pub threads: Option<usize>,
    /// Flat `key = value` config file; command-line flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Standard output format.
    #[arg(long, value_enum, default_value_t = Format::Table)]
    pub format: Format,
    /// 17 significant digits in CSV output instead of 6.
    #[arg(long)]
    pub full_precision: bool,
}

#[derive(Args, Debug)]
pub struct Study1Args {
    /// Selection coefficient phi in logit p = phi (x - 2).
    #[arg(long, allow_negative_numbers = true)]
    pub phi: Option<f64>,
    /// Parameters to estimate: Y_N, P_N or both (comma separated).
    #[arg(long)]
    pub parameters: Option<String>,
    #[command(flatten)]
    pub common: CommonSimArgs,
}

#[derive(Args, Debug)]
pub struct Study2Args {
    /// Scenario: I (both models linear), II (nonlinear propensity), III (nonlinear outcome).
    #[arg(long, value_parser = parse_scenario)]
    pub scenario: Option<Scenario>,
    #[command(flatten)]
    pub common: CommonSimArgs,
}

fn parse_scenario(s: &str) -> Result<Scenario, String> {
    s.parse().map_err(|_| "expected I, II or III".to_string())
}

#[derive(ValueEnum, Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum Format {
    Csv,
    #[default]
    Table,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum EstimateMethod {
    /// Exponential tilting of the big sample to known covariate means.
    Tilt,
    /// Second-phase PPS sample with pi = n w and Horvitz-Thompson estimation.
    Invsample,
    /// Inverse propensity weighting, propensity fitted on the auxiliary sample.
    Ps,
    /// Doubly robust: outcome regression plus propensity-weighted residuals.
    Dr,
    /// Nearest-neighbor mass imputation into the auxiliary sample.
    Rivers,
}

#[derive(Args, Debug)]
pub struct EstimateArgs {
    #[arg(value_enum)]
    pub method: EstimateMethod,
    /// Big-data sample CSV: id,x1,...,xp,y
    #[arg(long)]
    pub big: PathBuf,
    /// Probability sample CSV: id,x1,...,xp,d,delta[,y]
    #[arg(long = "aux-sample")]
    pub aux_sample: Option<PathBuf>,
    /// Known population means of x1,...,xp (comma separated).
    #[arg(long = "target-means", value_delimiter = ',', allow_negative_numbers = true)]
    pub target_means: Option<Vec<f64>>,
    /// Population size N.
    #[arg(long = "population-size")]
    pub population_size: Option<usize>,
    /// Second-phase sample size n (invsample).
    #[arg(long)]
    pub n: Option<usize>,
    /// Seed for the second-phase draw (invsample).
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Covariates in the propensity model as 1-based indices, or `none` for
    /// an intercept-only model (default: all covariates).
    #[arg(long = "ps-columns")]
    pub ps_columns: Option<String>,
}

#[derive(Subcommand, Debug)]
enum Diagnostic {
    /// Decompose the naive error into data quality, quantity and difficulty.
    Ddi {
        /// Population CSV: id,x1,...,xp,y
        #[arg(long)]
        population: PathBuf,
        /// Big-data sample CSV: id,x1,...,xp,y (ids must be population ids)
        #[arg(long)]
        big: PathBuf,
    },
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Simulate { study: Study::Study1(args) } => simulate::study1(args),
        Command::Simulate { study: Study::Study2(args) } => simulate::study2(args),
        Command::Estimate(args) => estimate::run(args),
        Command::Diagnose {
            what: Diagnostic::Ddi { population, big },
        } => diagnose::ddi(&population, &big),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}\n\nFor more information, try '--help'.");
            ExitCode::from(2)
        }
        Err(CliError::Runtime(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
