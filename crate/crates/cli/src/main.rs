//! `rgdl`: sample Ising data, train RBM stacks, export receptive fields and
//! check the RG/RBM mapping identities from the command line.

mod commands;
mod output;

use clap::{Args, Parser, Subcommand};
use rgdl::{Lattice, SpinDomain};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser, Debug)]
#[command(name = "rgdl", version, about = "Variational RG and RBM deep networks on Ising models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Every subcommand; also the on-disk form of `config.json`.
#[derive(Subcommand, Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", content = "args", rename_all = "kebab-case")]
pub enum Command {
    /// Metropolis samples of the nearest-neighbour Ising model.
    IsingSample(SampleArgs),
    /// Couplings of the 1D decimation flow.
    RgFlow(FlowArgs),
    /// Greedy layer-wise training of an RBM stack on a dataset.
    Train(TrainArgs),
    /// Effective receptive fields of a trained stack.
    ReceptiveFields(FieldArgs),
    /// Mean-field reconstructions of held-out samples.
    Reconstruct(ReconstructArgs),
    /// Exact-enumeration checks of the RG/RBM mapping.
    VerifyMapping(VerifyArgs),
    /// Re-run a command from an echoed `config.json`.
    Rerun(RerunArgs),
}

#[derive(Args, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleArgs {
    /// e.g. `2d:16x16:periodic` or `1d:32:free`.
    #[arg(long)]
    pub lattice: Lattice,
    #[arg(long = "J", alias = "j", allow_negative_numbers = true)]
    pub j: f64,
    #[arg(long, default_value_t = 40_000)]
    pub samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1000)]
    pub burn_in: usize,
    #[arg(long, default_value_t = 10)]
    pub thinning: usize,
    /// `pm1` or `01`.
    #[arg(long, default_value_t = SpinDomain::PlusMinusOne)]
    pub domain: SpinDomain,
    #[arg(long, default_value_t = 1)]
    pub chains: usize,
    /// Also write the samples as CSV.
    #[arg(long)]
    pub csv: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlowArgs {
    #[arg(long = "J0", alias = "j0")]
    pub j0: f64,
    #[arg(long)]
    pub steps: usize,
    /// Output directory; the CSV goes to stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainArgs {
    /// Dataset written by `ising-sample`.
    #[arg(long)]
    pub data: PathBuf,
    /// Layer sizes including the visible layer, e.g. `256,64,16`.
    #[arg(long, value_delimiter = ',', required = true)]
    pub layers: Vec<usize>,
    #[arg(long, default_value_t = 200)]
    pub epochs: usize,
    #[arg(long, default_value_t = 0.05)]
    pub lr: f64,
    #[arg(long, default_value_t = 0.5)]
    pub momentum: f64,
    #[arg(long, default_value_t = 100)]
    pub minibatch: usize,
    #[arg(long, default_value_t = 2e-4)]
    pub l1: f64,
    #[arg(long, default_value_t = 1)]
    pub cd_k: usize,
    #[arg(long, default_value_t = 1.0)]
    pub init_scale: f64,
    /// Trailing samples excluded from training; defaults to a tenth.
    #[arg(long)]
    pub held_out: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldArgs {
    /// Stack directory written by `train`.
    #[arg(long)]
    pub stack: PathBuf,
    /// Fail unless median field sizes strictly increase with depth.
    #[arg(long)]
    pub check_monotone: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReconstructArgs {
    #[arg(long)]
    pub stack: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    /// Number of trailing samples to reconstruct.
    #[arg(long, default_value_t = 500)]
    pub held_out: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifyArgs {
    #[arg(long, default_value_t = 100)]
    pub instances: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 5)]
    pub max_visible: usize,
    #[arg(long, default_value_t = 4)]
    pub max_hidden: usize,
    /// RBM model JSON to check in addition to the bundled suite.
    #[arg(long, requires = "hamiltonian")]
    pub rbm: Option<PathBuf>,
    /// Data Hamiltonian (text form) for `--rbm`.
    #[arg(long, requires = "rbm")]
    pub hamiltonian: Option<PathBuf>,
    /// Output directory; the report goes to stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RerunArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Replace the output directory recorded in the config.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Failure reported as a single `error: kind=… message=…` line.
#[derive(Debug)]
pub struct CliError {
    kind: &'static str,
    message: String,
}

impl CliError {
    pub fn new(kind: &'static str, message: impl Into<String>) -> Self {
        Self { kind, message: message.into() }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let flat: Vec<&str> = self.message.split_whitespace().collect();
        write!(f, "error: kind={} message={}", self.kind, flat.join(" "))
    }
}

impl From<rgdl::Error> for CliError {
    fn from(e: rgdl::Error) -> Self {
        Self::new(e.kind(), e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::new("io", e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        Self::new("json", e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let text = e.to_string();
            let first = text.lines().next().unwrap_or("invalid arguments");
            let msg = first.trim_start_matches("error: ");
            eprintln!("{}", CliError::new("usage", msg));
            return ExitCode::from(2);
        }
    };
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::FAILURE
        }
    }
}
