mod commands;
mod data;
mod failure;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use qcausal::Scheme;
use serde::Serialize;

use failure::Failure;

/// Causal inference for pairs of qubits from simulated measurement data.
#[derive(Parser, Debug)]
#[command(name = "qcausal", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Sample a count table (or write exact probabilities) for a scenario.
    Simulate(SimulateArgs),
    /// Linear-inversion causal tomography of interventionist data.
    Reconstruct(ReconstructArgs),
    /// Causal verdict and ellipsoid analysis of passive data.
    Classify(ClassifyArgs),
    /// Fit the mixture model at a fixed p.
    Fit(FitArgs),
    /// Fit over grids of true and fitted p.
    Sweep(SweepArgs),
    /// Print the correlation signatures of the eight extremal mechanisms.
    Demo(DemoArgs),
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScenarioKind {
    /// p·(Φ+ shared by C and B) + (1-p)·(identity channel D → B)
    SwapMix,
    /// Coherent cos θ·1 + i sin θ·SWAP interaction
    PartialSwap,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SchemeArg {
    Interventionist,
    Passive,
}

impl From<SchemeArg> for Scheme {
    fn from(s: SchemeArg) -> Self {
        match s {
            SchemeArg::Interventionist => Scheme::Interventionist,
            SchemeArg::Passive => Scheme::Passive,
        }
    }
}

#[derive(Args, Debug, Serialize)]
pub struct SimulateArgs {
    #[arg(long, value_enum)]
    pub scenario: ScenarioKind,
    /// Mixing probability p for swap-mix, angle θ for partial-swap
    #[arg(long, allow_negative_numbers = true)]
    pub param: f64,
    #[arg(long, value_enum)]
    pub scheme: SchemeArg,
    /// Runs per conditioning tuple
    #[arg(long, short = 'n', default_value_t = 1000)]
    pub n: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Write analytic probabilities instead of sampled counts
    #[arg(long)]
    pub exact: bool,
    /// Also write the scenario's causal map (usable as --reference)
    #[arg(long)]
    pub map_out: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

/// Where the statistics come from: a data file, or analytic probabilities
/// of a scenario named on the command line or in the file's manifest.
#[derive(Args, Debug, Serialize, Clone)]
pub struct InputArgs {
    /// Count table or exact distribution written by `simulate`
    #[arg(long = "in")]
    pub input: Option<PathBuf>,
    /// Use analytic probabilities instead of sampled counts
    #[arg(long)]
    pub exact: bool,
    #[arg(long, value_enum)]
    pub scenario: Option<ScenarioKind>,
    #[arg(long, allow_negative_numbers = true)]
    pub param: Option<f64>,
    #[arg(long, value_enum)]
    pub scheme: Option<SchemeArg>,
    /// Scale of exact statistics when no data file gives one
    #[arg(long, short = 'n')]
    pub n: Option<u64>,
}

#[derive(Args, Debug, Serialize)]
pub struct ReconstructArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Ideal causal map JSON to compare against
    #[arg(long)]
    pub reference: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Promise {
    None,
    Pure,
    Mixture,
}

#[derive(Args, Debug, Serialize)]
pub struct ClassifyArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long, value_enum, default_value_t = Promise::None)]
    pub promise: Promise,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug, Serialize, Clone)]
pub struct FitOptions {
    #[arg(long, default_value_t = qcausal::fitting::DEFAULT_LAMBDA)]
    pub lambda: f64,
    #[arg(long, default_value_t = 2)]
    pub restarts: usize,
    #[arg(long, default_value_t = 100)]
    pub max_iterations: usize,
    #[arg(long, default_value_t = 1e-4)]
    pub tolerance: f64,
    /// Use the simplex search instead of Levenberg-Marquardt
    #[arg(long)]
    pub nelder_mead: bool,
}

#[derive(Args, Debug, Serialize)]
pub struct FitArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long)]
    pub p_target: f64,
    #[command(flatten)]
    pub options: FitOptions,
    /// Ideal causal map JSON to compare the assembled fit against
    #[arg(long)]
    pub reference: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
pub struct SweepArgs {
    #[arg(long, value_enum, default_value_t = ScenarioKind::SwapMix)]
    pub scenario: ScenarioKind,
    /// Schemes to sweep; both by default
    #[arg(long, value_enum, value_delimiter = ',')]
    pub scheme: Vec<SchemeArg>,
    /// True p values: `lo:hi:step` or a comma list
    #[arg(long, default_value = "0:1:0.1")]
    pub p_exp: String,
    /// Fitted p values: `lo:hi:step` or a comma list
    #[arg(long, default_value = "0:1:0.05")]
    pub p_fit: String,
    #[arg(long, short = 'n', default_value_t = 2000)]
    pub n: u64,
    /// Sampled data sets per p_exp
    #[arg(long, default_value_t = 10)]
    pub seeds: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Fit analytic probabilities (one data set per p_exp)
    #[arg(long)]
    pub exact: bool,
    #[command(flatten)]
    pub options: FitOptions,
    /// Worker threads; all cores by default
    #[arg(long)]
    pub workers: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
pub struct DemoArgs {
    /// Also write the rows as JSON
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { failure::USAGE } else { 0 });
        }
    };
    let result = match &cli.command {
        Command::Simulate(a) => commands::simulate(a),
        Command::Reconstruct(a) => commands::reconstruct(a),
        Command::Classify(a) => commands::classify(a),
        Command::Fit(a) => commands::fit(a),
        Command::Sweep(a) => commands::sweep(a),
        Command::Demo(a) => commands::demo(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.kind.code())
        }
    }
}

pub type CmdResult<T = ()> = Result<T, Failure>;
