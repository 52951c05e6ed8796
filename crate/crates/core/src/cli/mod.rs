//! `photodet <scenario> [--config FILE] [overrides]`
//!
//! Every scenario writes one CSV and prints a short summary. Exit codes:
//! 0 success, 2 configuration error, 3 numerical failure, 4 validation
//! failure.

pub mod config;
pub mod scenarios;
pub mod validate;

use std::ffi::OsString;
use std::fmt;
use std::io::Write;
use std::path::PathBuf;

use clap::Parser;

pub use config::{ConfigError, RunConfig, Scenario, SweepRange};
pub use scenarios::{Cell, Table};

use crate::error::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;
pub const EXIT_VALIDATION: i32 = 4;

#[derive(Parser, Debug)]
#[command(name = "photodet", version, about = "Cascaded single-photon detector model", allow_negative_numbers = true)]
struct Args {
    /// oracle, fig2, fig3, fig4, sweep-pabs or validate
    scenario: String,
    /// flat `key = value` file; flags take precedence
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    kappa: Option<f64>,
    #[arg(long)]
    gamma1: Option<f64>,
    #[arg(long)]
    gamma2: Option<f64>,
    /// amplifier decay rate
    #[arg(long = "Gamma")]
    amp_decay: Option<f64>,
    /// amplifier drive strength
    #[arg(long)]
    mu: Option<f64>,
    /// molecule detuning
    #[arg(long)]
    delta: Option<f64>,
    /// amplifier detuning
    #[arg(long = "Delta")]
    amp_detuning: Option<f64>,
    /// amplifier Fock cutoff
    #[arg(long)]
    nc: Option<usize>,
    #[arg(long)]
    horizon: Option<f64>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// detection efficiency multiplying N_D
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long)]
    sweep_min: Option<f64>,
    #[arg(long)]
    sweep_max: Option<f64>,
    #[arg(long)]
    sweep_step: Option<f64>,
}

impl Args {
    fn into_config(self) -> Result<RunConfig, ConfigError> {
        let scenario: Scenario = self.scenario.parse()?;
        let mut cfg = RunConfig::defaults(scenario);
        if let Some(path) = &self.config {
            cfg.apply_file(path)?;
        }
        let p = &mut cfg.params;
        macro_rules! over {
            ($($src:expr => $dst:expr),* $(,)?) => { $(if let Some(v) = $src { $dst = v; })* };
        }
        over! {
            self.kappa => p.kappa,
            self.gamma1 => p.gamma1,
            self.gamma2 => p.gamma2,
            self.amp_decay => p.amp_decay,
            self.mu => p.drive,
            self.delta => p.detuning,
            self.amp_detuning => p.amp_detuning,
            self.nc => p.n_c,
            self.horizon => cfg.horizon,
            self.samples => cfg.samples,
            self.out => cfg.output_path,
            self.eta => cfg.eta,
            self.sweep_min => cfg.sweep.min,
            self.sweep_max => cfg.sweep.max,
            self.sweep_step => cfg.sweep.step,
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug)]
pub enum CliError {
    Config(ConfigError),
    Numerical(Error),
    Validation(Vec<String>),
    Io(std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Numerical(_) => EXIT_NUMERICAL,
            CliError::Validation(_) => EXIT_VALIDATION,
            CliError::Io(_) => EXIT_IO,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(e) => write!(f, "configuration error: {e}"),
            CliError::Numerical(e @ Error::TruncationBreach { suggested, .. }) => {
                write!(f, "numerical failure: {e}; rerun with --nc {suggested}")
            }
            CliError::Numerical(e) => write!(f, "numerical failure: {e}"),
            CliError::Validation(failed) => write!(f, "validation failed: {}", failed.join(", ")),
            CliError::Io(e) => write!(f, "i/o error: {e}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidParameter { name, reason } => CliError::Config(ConfigError {
                source: "configuration".into(),
                line: None,
                field: name.into(),
                message: reason,
            }),
            other => CliError::Numerical(other),
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e)
    }
}

/// Output of a scenario before anything touches the filesystem.
#[derive(Clone, Debug, PartialEq)]
pub struct Report {
    pub table: Table,
    pub summary: Vec<String>,
    /// Names of failed checks; only the validation scenario sets these.
    pub failures: Vec<String>,
}

pub fn execute(cfg: &RunConfig) -> Result<Report, CliError> {
    cfg.validate()?;
    let report = match cfg.scenario {
        Scenario::Oracle => scenarios::oracle(cfg)?,
        Scenario::Fig2 => scenarios::fig2(cfg)?,
        Scenario::Fig3 => scenarios::fig3(cfg)?,
        Scenario::Fig4 => scenarios::fig4(cfg)?,
        Scenario::SweepPabs => scenarios::sweep_pabs(cfg)?,
        Scenario::Validate => validate::report(cfg)?,
    };
    Ok(report)
}

/// Runs a scenario, writes its CSV, and prints the summary to `out`.
pub fn run(cfg: &RunConfig, out: &mut impl Write) -> Result<(), CliError> {
    let report = execute(cfg)?;
    std::fs::write(&cfg.output_path, report.table.to_csv())?;
    for line in &report.summary {
        writeln!(out, "{line}")?;
    }
    writeln!(out, "wrote {} rows to {}", report.table.rows.len(), cfg.output_path.display())?;
    if !report.failures.is_empty() {
        return Err(CliError::Validation(report.failures));
    }
    Ok(())
}

/// Full command-line entry point; returns the process exit code.
pub fn main_with_args<I, T>(args: I, out: &mut impl Write, err: &mut impl Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args = match Args::try_parse_from(args) {
        Ok(a) => a,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = if e.use_stderr() { write!(err, "{e}") } else { write!(out, "{e}") };
            return code;
        }
    };
    let cfg = match args.into_config() {
        Ok(c) => c,
        Err(e) => {
            let _ = writeln!(err, "configuration error: {e}");
            return EXIT_CONFIG;
        }
    };
    match run(&cfg, out) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "{e}");
            e.exit_code()
        }
    }
}
