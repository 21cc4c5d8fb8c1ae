//! Command-line front end: problem files in, barycenters and reports out.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

pub mod commands;
pub mod error;
pub mod problem;

pub use error::{CliError, EXIT_CAP, EXIT_INPUT, EXIT_NOT_CONVERGED};

#[derive(Parser, Debug)]
#[command(name = "gwb", author, version, about = "Generalized Wasserstein barycenters from projected marginals")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Solve a problem file and write result.json plus the barycenter.
    Solve(SolveArgs),
    /// Report whether the centered Gaussian solution is unique for the maps.
    CheckUniqueness(UniquenessArgs),
    /// Project a result measure through every map into CSV files.
    Project(ProjectArgs),
    /// Squared distance between two measure files of the same kind.
    Distance(DistanceArgs),
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Route {
    MmExact,
    MmSinkhorn,
    ClassicalMm,
    FreeSupport,
    Gaussian,
    Gmm,
}

impl std::fmt::Display for Route {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let value = self.to_possible_value().expect("no skipped variants");
        f.write_str(value.get_name())
    }
}

#[derive(Args, Debug, Clone)]
pub struct SolveArgs {
    pub problem: PathBuf,
    #[arg(long, value_enum)]
    pub route: Route,
    /// Entropic regularization (absolute, in units of the cost).
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Number of atoms for the free-support route (default: largest marginal).
    #[arg(long)]
    pub atoms: Option<usize>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub max_iter: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Added as `η I` to Gaussian covariances.
    #[arg(long, default_value_t = 0.0)]
    pub regularization: f64,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Args, Debug, Clone)]
pub struct UniquenessArgs {
    pub problem: PathBuf,
}

#[derive(Args, Debug, Clone)]
pub struct ProjectArgs {
    pub problem: PathBuf,
    /// A result.json from `solve`, or a bare measure file.
    pub result: PathBuf,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Args, Debug, Clone)]
pub struct DistanceArgs {
    pub first: PathBuf,
    pub second: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Parses `args` (program name first), runs the command and returns the exit
/// code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            if e.use_stderr() {
                let _ = write!(err, "{e}");
                return EXIT_INPUT;
            }
            let _ = write!(out, "{e}");
            return 0;
        }
    };
    let result = match &cli.command {
        Command::Solve(a) => commands::cmd_solve(a, out),
        Command::CheckUniqueness(a) => commands::cmd_check_uniqueness(a, out),
        Command::Project(a) => commands::cmd_project(a, out),
        Command::Distance(a) => commands::cmd_distance(a, out),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}
