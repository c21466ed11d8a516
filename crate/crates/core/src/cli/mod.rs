//! The `hbcrash` command line: ingest, screen, fit, compare, synth and
//! report, driven by one TOML run config.
//!
//! Output layout under the run's output directory:
//!
//! ```text
//! ingest/   frequencies.{txt,csv}, linkage.txt
//! coded/    <label>.csv + <label>.meta.json
//! screen/   <label>.vif.{txt,csv}
//! fits/<label>/  trace.csv, convergence.{txt,csv}, summary.{txt,csv},
//!                plotdata.csv, score.json, warnings.txt
//! compare/  <name>.{txt,csv}, tables.txt
//! synth/    <scenario>.csv + .meta.json, truth.toml
//! report/   report.txt, plotdata.csv
//! ```
//!
//! Exit codes: 0 success, 2 usage, 3 data, 4 numerical or convergence.

mod commands;
mod config;

pub use commands::{cmd_compare, cmd_fit, cmd_ingest, cmd_report, cmd_screen, cmd_synth, FitOptions, SynthOptions};
pub use config::{
    CheckSettings, ComparisonEntry, EmitFlags, InputPaths, ModeFilter, ModelEntry, ModelSource, ResolvedModel,
    RunConfig,
};

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use crate::dataset::DatasetError;
use crate::evaluation::EvaluationError;
use crate::model::ModelError;
use crate::sampler::SamplerError;
use crate::screening::ScreeningError;
use crate::synthlab::SynthError;

pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_NUMERICAL: i32 = 4;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("dataset: {0}")]
    Dataset(#[from] DatasetError),
    #[error("screening: {0}")]
    Screening(#[from] ScreeningError),
    #[error("screening: collinear design in {0}")]
    Collinear(String),
    #[error("model: {0}")]
    Model(#[from] ModelError),
    #[error("sampler: {0}")]
    Sampler(#[from] SamplerError),
    #[error("evaluation: {0}")]
    Evaluation(#[from] EvaluationError),
    #[error("synthlab: {0}")]
    Synth(#[from] SynthError),
    #[error("missing artifact {0}; run the earlier pipeline step first")]
    MissingArtifact(String),
    #[error("no fit found for `{0}`")]
    MissingFit(String),
    #[error("convergence: {0}")]
    NotConverged(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Self::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Model(ModelError::InvalidSpec(_) | ModelError::UnknownTerm(_)) => EXIT_USAGE,
            CliError::Synth(SynthError::InvalidScenario(_) | SynthError::InvalidGrid(_)) => EXIT_USAGE,
            CliError::Sampler(SamplerError::InvalidConfig(_)) => EXIT_USAGE,
            CliError::Evaluation(EvaluationError::InsufficientModels(_)) => EXIT_USAGE,
            CliError::Evaluation(EvaluationError::MismatchedDataset(..)) => EXIT_DATA,
            CliError::Dataset(_)
            | CliError::Screening(_)
            | CliError::Collinear(_)
            | CliError::Model(_)
            | CliError::Synth(_)
            | CliError::MissingArtifact(_)
            | CliError::MissingFit(_)
            | CliError::Io { .. } => EXIT_DATA,
            CliError::Sampler(_) | CliError::Evaluation(_) | CliError::NotConverged(_) => EXIT_NUMERICAL,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "hbcrash", version, about = "Hierarchical Bayesian crash-severity toolkit")]
pub struct Cli {
    /// Run config (TOML).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Master seed; overrides `mcmc.seed` in the config.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory; overrides `out_dir` in the config.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads for parallel chains (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    pub jobs: usize,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Link, classify, tabulate and dummy-code the crash records.
    Ingest,
    /// Variance inflation factors for each model's fixed design.
    Screen {
        labels: Vec<String>,
    },
    /// Sample posteriors and write summaries, diagnostics and criteria.
    Fit {
        labels: Vec<String>,
        #[command(flatten)]
        options: FitArgs,
    },
    /// Rank fitted models by WAIC and LOO.
    Compare {
        labels: Vec<String>,
        /// Name for an ad-hoc comparison of `labels`.
        #[arg(long, default_value = "adhoc")]
        name: String,
    },
    /// Generate a synthetic dataset from a scenario, or rewrite the bundled fixture.
    Synth {
        #[command(flatten)]
        options: SynthArgs,
    },
    /// Collect fitted models into one text report and plot-data file.
    Report,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// Fit without a prior VIF screen.
    #[arg(long)]
    pub skip_screen: bool,
    /// Exit 0 even when the convergence check fails.
    #[arg(long)]
    pub allow_unconverged: bool,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Scenario TOML.
    #[arg(long, conflicts_with = "fixture")]
    pub scenario: Option<PathBuf>,
    /// Write the bundled crash fixture instead.
    #[arg(long)]
    pub fixture: bool,
}

fn load_config(cli: &Cli) -> Result<RunConfig, CliError> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| CliError::Usage("this command needs --config PATH".into()))?;
    let mut cfg = RunConfig::load(path)?;
    if let Some(seed) = cli.seed {
        cfg.mcmc.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.out_dir = out.clone();
    }
    Ok(cfg)
}

/// Execute a parsed command line.
pub fn run(cli: Cli) -> Result<(), CliError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.jobs)
        .build()
        .map_err(|e| CliError::Usage(format!("--jobs: {e}")))?;
    pool.install(|| match &cli.command {
        Command::Synth { options } => {
            let opts = SynthOptions {
                scenario: options.scenario.clone(),
                fixture: options.fixture,
                seed: cli.seed,
                out_dir: cli.out.clone(),
            };
            let cfg = cli.config.as_ref().map(|_| load_config(&cli)).transpose()?;
            cmd_synth(cfg.as_ref(), &opts)
        }
        cmd => {
            let cfg = load_config(&cli)?;
            match cmd {
                Command::Ingest => cmd_ingest(&cfg),
                Command::Screen { labels } => cmd_screen(&cfg, labels),
                Command::Fit { labels, options } => cmd_fit(
                    &cfg,
                    labels,
                    FitOptions {
                        skip_screen: options.skip_screen,
                        allow_unconverged: options.allow_unconverged,
                    },
                ),
                Command::Compare { labels, name } => cmd_compare(&cfg, labels, name),
                Command::Report => cmd_report(&cfg),
                Command::Synth { .. } => unreachable!("handled above"),
            }
        }
    })
}

/// Parse `args` and run; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { 0 };
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
