//! `ldd`: longitudinal disparity decomposition from the command line.
//!
//! Exit codes: 0 ok, 2 usage, 3 data validation, 4 estimation failure,
//! 5 I/O. Failures print one line `ERROR <code> <kind>: <message>`.

mod config;
mod pipeline;

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{read_config, RunConfig};
use pipeline::Stage;

#[derive(Debug, Clone, PartialEq)]
pub struct CliError {
    pub code: u8,
    pub kind: String,
    pub message: String,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        CliError {
            code: 2,
            kind: "usage".into(),
            message: message.into(),
        }
    }

    pub fn io(message: impl Into<String>) -> Self {
        CliError {
            code: 5,
            kind: "io".into(),
            message: message.into(),
        }
    }
}

impl From<ldd::Error> for CliError {
    fn from(e: ldd::Error) -> Self {
        use ldd::Error::*;
        let code = match &e {
            Schema(_) | Parse { .. } | Validation(_) => 3,
            Domain(_) => 2,
            Io(_) => 5,
            EmptyWindow { .. }
            | EmptyLevel { .. }
            | SingularFit { .. }
            | GridTooNarrow { .. }
            | TooManyMissing { .. }
            | AllPointsExcluded
            | Quadrature(_) => 4,
        };
        CliError {
            code,
            kind: e.kind().to_string(),
            message: e.to_string(),
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "ldd", version, about = "Longitudinal disparity decomposition")]
struct Cli {
    /// Worker threads for grid, bootstrap and cross-validation loops.
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Group summary table.
    Summarize(Settings),
    /// Leave-one-subject-out bandwidth selection.
    SelectBandwidths(Settings),
    /// Point estimate of the decomposition.
    Decompose(Settings),
    /// Decomposition with bootstrap simultaneous confidence bands.
    Scb(Settings),
    /// Summary, bandwidths, decomposition and bands in one pass.
    Run(Settings),
    /// Synthetic data with known truth.
    Simulate(Settings),
}

/// Every option can also be given as `key = value` in `--config`; flags win.
#[derive(Args, Debug, Clone, Default)]
struct Settings {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    input: Option<String>,
    /// Majority group label.
    #[arg(long)]
    majority: Option<String>,
    /// Minority group label.
    #[arg(long)]
    minority: Option<String>,
    #[arg(long)]
    id_col: Option<String>,
    #[arg(long)]
    group_col: Option<String>,
    #[arg(long)]
    time_col: Option<String>,
    #[arg(long)]
    outcome_col: Option<String>,
    #[arg(long)]
    modifier_col: Option<String>,
    /// Comma-separated covariate columns (default: every other column).
    #[arg(long)]
    covariates: Option<String>,
    /// Comma-separated covariates summarized as categories.
    #[arg(long)]
    categorical: Option<String>,
    /// `continuous`, `discrete` or `discrete:0,1,..`.
    #[arg(long)]
    modifier: Option<String>,
    /// One character or `tab`.
    #[arg(long)]
    delimiter: Option<String>,
    /// `ldd`, `mldd` or `cmldd`.
    #[arg(long)]
    method: Option<String>,
    /// Majority modifier value for cmldd.
    #[arg(long = "zM", allow_hyphen_values = true)]
    z_major: Option<String>,
    /// Minority modifier value for cmldd.
    #[arg(long = "zm", allow_hyphen_values = true)]
    z_minor: Option<String>,
    #[arg(long)]
    kernel: Option<String>,
    /// Fixed time bandwidth; skips cross-validation.
    #[arg(long, allow_hyphen_values = true)]
    b1: Option<String>,
    /// Fixed modifier bandwidth (continuous modifiers).
    #[arg(long, allow_hyphen_values = true)]
    b2: Option<String>,
    /// Candidates per bandwidth axis for cross-validation.
    #[arg(long)]
    cv_grid: Option<String>,
    /// Fraction of subjects held out during cross-validation.
    #[arg(long)]
    cv_subsample: Option<String>,
    /// Bootstrap replicates.
    #[arg(long = "boot-B")]
    boot_b: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    alpha: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    seed: Option<String>,
    #[arg(long)]
    grid_points: Option<String>,
    /// Fraction of the common time support trimmed from each end.
    #[arg(long, allow_hyphen_values = true)]
    trim: Option<String>,
    /// Fall back to a small ridge on singular local fits.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    ridge: Option<String>,
    /// Simulation preset.
    #[arg(long)]
    preset: Option<String>,
    /// Subjects per group for `simulate`.
    #[arg(long)]
    n: Option<String>,
    /// Output directory.
    #[arg(long)]
    out: Option<String>,
}

impl Settings {
    fn merged(&self) -> Result<BTreeMap<String, String>, CliError> {
        let mut map = match &self.config {
            Some(p) => read_config(p)?,
            None => BTreeMap::new(),
        };
        let flags = [
            ("input", &self.input),
            ("majority", &self.majority),
            ("minority", &self.minority),
            ("id-col", &self.id_col),
            ("group-col", &self.group_col),
            ("time-col", &self.time_col),
            ("outcome-col", &self.outcome_col),
            ("modifier-col", &self.modifier_col),
            ("covariates", &self.covariates),
            ("categorical", &self.categorical),
            ("modifier", &self.modifier),
            ("delimiter", &self.delimiter),
            ("method", &self.method),
            ("zM", &self.z_major),
            ("zm", &self.z_minor),
            ("kernel", &self.kernel),
            ("b1", &self.b1),
            ("b2", &self.b2),
            ("cv-grid", &self.cv_grid),
            ("cv-subsample", &self.cv_subsample),
            ("boot-B", &self.boot_b),
            ("alpha", &self.alpha),
            ("seed", &self.seed),
            ("grid-points", &self.grid_points),
            ("trim", &self.trim),
            ("ridge", &self.ridge),
            ("preset", &self.preset),
            ("n", &self.n),
            ("out", &self.out),
        ];
        for (k, v) in flags {
            if let Some(v) = v {
                map.insert(k.to_string(), v.clone());
            }
        }
        Ok(map)
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let (stage, settings) = match cli.command {
        Command::Summarize(s) => (Stage::Summarize, s),
        Command::SelectBandwidths(s) => (Stage::SelectBandwidths, s),
        Command::Decompose(s) => (Stage::Decompose, s),
        Command::Scb(s) => (Stage::Scb, s),
        Command::Run(s) => (Stage::Run, s),
        Command::Simulate(s) => (Stage::Simulate, s),
    };
    let cfg = RunConfig::resolve(settings.merged()?)?;
    if let Some(n) = cli.workers {
        if n == 0 {
            return Err(CliError::usage("--workers must be positive"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::usage(e.to_string()))?;
    }
    pipeline::execute(stage, &cfg)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or("").trim_start_matches("error: ");
            eprintln!("ERROR 2 usage: {first}");
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("ERROR {} {}: {}", e.code, e.kind, e.message.replace('\n', " "));
            ExitCode::from(e.code)
        }
    }
}
