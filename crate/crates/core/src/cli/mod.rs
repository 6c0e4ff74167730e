//! Batch command-line front end.
//!
//! Exit codes: 0 on success, 1 when a solver does not converge, 2 on input
//! or usage errors.

pub mod document;
pub mod ingest;
mod run;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::clustering::{BasisSpec, SolverChoice};
use crate::error::Error;
use ingest::Layout;

pub use run::run;

#[derive(Debug, Parser)]
#[command(name = "chebclust", version, about = "Uniform-norm prototypes and clustering of sampled curves")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Minimax prototype for the whole signal group.
    Approx(ApproxArgs),
    /// k-medoid clustering under the uniform norm.
    Cluster(ClusterArgs),
    /// Verify a prototype against the signals.
    Check(CheckArgs),
    /// Upper and lower envelope only.
    Envelope(EnvelopeArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LayoutArg {
    Wide,
    Long,
}

impl From<LayoutArg> for Layout {
    fn from(l: LayoutArg) -> Self {
        match l {
            LayoutArg::Wide => Layout::Wide,
            LayoutArg::Long => Layout::Long,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BasisArg {
    Monomial,
    Chebyshev,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SolverArg {
    Exchange,
    Lp,
    CrossCheck,
}

impl From<SolverArg> for SolverChoice {
    fn from(s: SolverArg) -> Self {
        match s {
            SolverArg::Exchange => SolverChoice::Exchange,
            SolverArg::Lp => SolverChoice::Lp,
            SolverArg::CrossCheck => SolverChoice::CrossCheck,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct InputArgs {
    /// Signal file (CSV).
    pub input: PathBuf,
    #[arg(long, value_enum, default_value_t = LayoutArg::Wide)]
    pub layout: LayoutArg,
}

#[derive(Debug, Clone, Args)]
pub struct ModelArgs {
    /// Prototype degree n (n + 1 coefficients).
    #[arg(long, default_value_t = 1)]
    pub degree: usize,
    #[arg(long, value_enum, default_value_t = BasisArg::Monomial)]
    pub basis: BasisArg,
    #[arg(long, default_value_t = 1e-9)]
    pub tol: f64,
}

impl ModelArgs {
    pub fn spec(&self) -> BasisSpec {
        match self.basis {
            BasisArg::Monomial => BasisSpec::Monomial { degree: self.degree },
            BasisArg::Chebyshev => BasisSpec::Chebyshev { degree: self.degree },
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct OutputArgs {
    /// Machine-readable JSON document.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Per-grid-point CSV for plotting.
    #[arg(long)]
    pub trace_out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct ApproxArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, value_enum, default_value_t = SolverArg::Exchange)]
    pub solver: SolverArg,
    /// Interpolation-solve limit of the exchange solver.
    #[arg(long, default_value_t = 1000)]
    pub max_iter: usize,
    #[command(flatten)]
    pub output: OutputArgs,
    /// Write the minimax LP in MPS format.
    #[arg(long)]
    pub lp_dump: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct ClusterArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Number of clusters.
    #[arg(long)]
    pub k: usize,
    #[arg(long, value_enum, default_value_t = SolverArg::Exchange)]
    pub solver: SolverArg,
    /// Outer assignment/update iterations.
    #[arg(long, default_value_t = 100)]
    pub max_iter: usize,
    /// Interpolation-solve limit per exchange run.
    #[arg(long, default_value_t = 1000)]
    pub solver_max_iter: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Re-solve every changed cluster.
    #[arg(long)]
    pub no_skip_rules: bool,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct CheckArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Degree and basis; ignored with `--from-result`, which carries its own.
    #[command(flatten)]
    pub model: ModelArgs,
    /// Prototype coefficients, comma separated.
    #[arg(
        long,
        value_delimiter = ',',
        allow_negative_numbers = true,
        conflicts_with = "from_result",
        required_unless_present = "from_result"
    )]
    pub coeffs: Option<Vec<f64>>,
    /// Document written by `approx` or `cluster --out`.
    #[arg(long)]
    pub from_result: Option<PathBuf>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct EnvelopeArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long, default_value_t = 1e-9)]
    pub tol: f64,
    #[command(flatten)]
    pub output: OutputArgs,
}

/// Exit code for a failed run.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::NotConverged(_) | Error::SolverDisagreement { .. } | Error::DegenerateBasis(_) | Error::Exchange(_) => 1,
        _ => 2,
    }
}

/// Parses `args` and runs the command, writing the report to `stdout` and
/// diagnostics to `stderr`.
pub fn main_with<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let text = e.render().to_string();
            if code == 0 {
                let _ = write!(stdout, "{text}");
            } else {
                let _ = write!(stderr, "{text}");
            }
            return code;
        }
    };
    match run(&cli.command, stdout) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            exit_code(&e)
        }
    }
}
