//! Front end for the `bloch-kinetics` binary: flag and config-file handling,
//! the four commands and the mapping of failures to exit codes.
//!
//! Exit codes: 0 ok, 1 usage, 2 regime violation, 3 verification failure,
//! 4 numerical failure.

pub mod commands;
pub mod config;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use config::{Format, PartialConfig, RunConfig};

/// Environment variable that sets the worker-thread count.
pub const THREADS_ENV: &str = "BLOCH_KINETICS_THREADS";

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("regime: {0}")]
    Regime(String),
    #[error("verification failed: {0}")]
    Verification(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Regime(_) => 2,
            CliError::Verification(_) => 3,
            CliError::Numerical(_) => 4,
        }
    }

    pub(crate) fn from_usage(e: bloch_core::Error) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<bloch_core::Error> for CliError {
    fn from(e: bloch_core::Error) -> Self {
        use bloch_core::Error as E;
        match &e {
            E::Regime(_) | E::InfraredDivergence(_) => CliError::Regime(e.to_string()),
            _ if e.is_numerical() => CliError::Numerical(e.to_string()),
            _ => CliError::Usage(e.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "bloch-kinetics",
    version,
    about = "Low-temperature conductivity from the linearized electron-boson collision integral"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub flags: Flags,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Solve at one temperature (--temp) and print tau and sigma.
    Solve,
    /// Solve over a temperature range and fit a power law.
    Sweep,
    /// Eigenvalues of the symmetrized K0 at --temp.
    Spectrum,
    /// Run the built-in invariant checks at --temp.
    Validate,
}

#[derive(Debug, Clone, Default, Args)]
pub struct Flags {
    /// phonon, magnon, coulomb or custom
    #[arg(long, global = true)]
    pub spec: Option<String>,
    /// Dispersion exponent (custom)
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub alpha: Option<f64>,
    /// Coupling exponent (custom)
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub beta: Option<f64>,
    /// Spectral gap in units of omega0 (required for magnon)
    #[arg(long, global = true)]
    pub gap: Option<f64>,
    /// eps_F / omega0
    #[arg(long = "ef-ratio", global = true)]
    pub ef_ratio: Option<f64>,
    /// Number of grid nodes
    #[arg(long = "grid-n", global = true)]
    pub grid_n: Option<usize>,
    /// Grid half-width in units of T
    #[arg(long = "grid-xmax", global = true)]
    pub grid_xmax: Option<f64>,
    /// direct, leading or averaged
    #[arg(long, global = true)]
    pub method: Option<String>,
    /// Drop the K1 term
    #[arg(long = "no-k1", global = true)]
    pub no_k1: bool,
    #[arg(long, global = true)]
    pub tmin: Option<f64>,
    #[arg(long, global = true)]
    pub tmax: Option<f64>,
    #[arg(long, global = true)]
    pub npoints: Option<usize>,
    /// Space sweep temperatures linearly instead of logarithmically
    #[arg(long, global = true)]
    pub linear: bool,
    /// Temperature for solve, spectrum and validate (units of omega0)
    #[arg(long, global = true)]
    pub temp: Option<f64>,
    /// Output file
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// csv or json
    #[arg(long, global = true)]
    pub format: Option<String>,
    /// Config file of `key = value` lines
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Replace every validation tolerance
    #[arg(long, global = true)]
    pub tolerance: Option<f64>,
    /// Permit phonon temperatures above omega0/10
    #[arg(long = "allow-high-t", global = true)]
    pub allow_high_t: bool,
}

impl Flags {
    pub fn to_partial(&self) -> Result<PartialConfig, CliError> {
        let mut p = PartialConfig::default();
        if let Some(s) = &self.spec {
            p.set("spec", s)?;
        }
        if let Some(m) = &self.method {
            p.set("method", m)?;
        }
        if let Some(f) = &self.format {
            p.set("format", f)?;
        }
        p.alpha = self.alpha;
        p.beta = self.beta;
        p.gap = self.gap;
        p.ef_ratio = self.ef_ratio;
        p.grid_n = self.grid_n;
        p.grid_xmax = self.grid_xmax;
        p.include_k1 = self.no_k1.then_some(false);
        p.tmin = self.tmin;
        p.tmax = self.tmax;
        p.npoints = self.npoints;
        p.log_spacing = self.linear.then_some(false);
        p.temp = self.temp;
        p.out = self.out.clone();
        p.tolerance = self.tolerance;
        p.allow_high_temperature = self.allow_high_t.then_some(true);
        Ok(p)
    }
}

/// Config file values overridden by flags, then defaults.
pub fn parse_config(flags: &Flags) -> Result<RunConfig, CliError> {
    let base = match &flags.config {
        Some(path) => PartialConfig::from_file(path)?,
        None => PartialConfig::default(),
    };
    RunConfig::resolve(base.merged(flags.to_partial()?))
}

/// Parses `args` (including the program name), runs the command and returns
/// the exit code. Results go to `out`, diagnostics to `err`.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = if code == 0 {
                write!(out, "{e}")
            } else {
                write!(err, "{e}")
            };
            return code;
        }
    };
    let result = parse_config(&cli.flags).and_then(|cfg| match cli.command {
        Command::Solve => commands::cmd_solve(&cfg, out, err),
        Command::Sweep => commands::cmd_sweep(&cfg, out, err),
        Command::Spectrum => commands::cmd_spectrum(&cfg, out, err),
        Command::Validate => commands::cmd_validate(&cfg, out, err),
    });
    match result {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

/// Thread count requested through [`THREADS_ENV`], if any.
pub fn threads_from_env() -> Result<Option<usize>, CliError> {
    match std::env::var(THREADS_ENV) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(CliError::Usage(format!(
                "{THREADS_ENV} must be a positive integer, got {v:?}"
            ))),
        },
        Err(_) => Ok(None),
    }
}
