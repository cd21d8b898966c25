//! The `logaug` command line: `check`, `train`, `eval`, `sweep`, `gen` and `graph`.
//!
//! Exit codes are a stable contract: 0 on success, 1 when rules are
//! ill-formed or cyclic, 2 for I/O, usage and configuration errors.

mod check;
mod commands;
mod config;
mod sweep;

use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use crate::augment::AugmentError;
use crate::rules::{parse_rules, RuleProgram};
use crate::tasks::{shipped_rules, Metric, TaskError, TaskKind};

pub use config::{ConfigLayer, RunConfig, OUT_ENV};
pub use sweep::{read_results, summary_table};

#[derive(Debug, Parser)]
#[command(name = "logaug", version, about = "Compile logic rules into neural networks and train them")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Validate rule files against a model graph without training.
    Check(CheckArgs),
    /// Train one cell (one fraction, one seed, one rule set) and save a checkpoint.
    Train(RunArgs),
    /// Score a saved checkpoint.
    Eval(EvalArgs),
    /// Run the fraction × seed × rule set × rho grid, resuming from earlier results.
    Sweep(RunArgs),
    /// Generate a synthetic dataset and write it to a directory.
    Gen(GenArgs),
    /// Write a model graph (with its probe context) as JSON.
    Graph(GraphArgs),
}

/// Flags shared by `train` and `sweep`. Each overrides the config file.
#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    /// TOML file with any of the settings below.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub task: Option<TaskKind>,
    /// Rule files or shipped rule names (`none` for the baseline). `train`
    /// merges them into one program; `sweep` treats each as a rule set.
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    pub rules: Vec<String>,
    /// Scaling factors, e.g. `1,4,hard`.
    #[arg(long, value_delimiter = ',')]
    pub rho: Vec<String>,
    /// Shares of the training pool, each in (0, 1].
    #[arg(long, alias = "fraction", value_delimiter = ',')]
    pub fractions: Vec<f64>,
    #[arg(long, conflicts_with = "seeds")]
    pub seed: Option<u64>,
    #[arg(long, value_delimiter = ',')]
    pub seeds: Vec<u64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub metric: Option<Metric>,
    /// Dataset directory written by `gen`; without it the data is generated.
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub gen_seed: Option<u64>,
    #[arg(long)]
    pub noise: Option<f64>,
    /// Output directory (default: $LOGAUG_OUT, else `runs`).
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub workers: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct CheckArgs {
    /// Rule files or shipped rule names.
    #[arg(long, value_delimiter = ',', num_args = 1.., required = true)]
    pub rules: Vec<String>,
    /// JSON graph file written by `graph`.
    #[arg(long, conflicts_with = "task", required_unless_present = "task")]
    pub graph: Option<PathBuf>,
    /// Check against this task's model on a probe example instead of a graph file.
    #[arg(long)]
    pub task: Option<TaskKind>,
    #[arg(long)]
    pub data: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Dataset directory; defaults to regenerating the training data.
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub metric: Option<Metric>,
    /// Score the `train` pool instead of `test`.
    #[arg(long, default_value = "test")]
    pub split: String,
    #[arg(long)]
    pub workers: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct GenArgs {
    #[arg(long)]
    pub task: TaskKind,
    #[arg(long)]
    pub gen_seed: Option<u64>,
    #[arg(long)]
    pub noise: Option<f64>,
    #[arg(long)]
    pub train_size: Option<usize>,
    #[arg(long)]
    pub test_size: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct GraphArgs {
    #[arg(long)]
    pub task: TaskKind,
    /// Augment the graph with these rules before writing it.
    #[arg(long, value_delimiter = ',')]
    pub rules: Vec<String>,
    #[arg(long)]
    pub rho: Option<String>,
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Output JSON path; tables are written next to it.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Error)]
pub enum CliError {
    /// Rules that do not parse, ground or compile.
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Config(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Config(_) => 2,
        }
    }

    pub(crate) fn io(path: &std::path::Path, e: impl std::fmt::Display) -> Self {
        CliError::Config(format!("{}: {e}", path.display()))
    }
}

impl From<AugmentError> for CliError {
    fn from(e: AugmentError) -> Self {
        match e {
            AugmentError::UnknownTable { .. } => CliError::Config(e.to_string()),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

impl From<TaskError> for CliError {
    fn from(e: TaskError) -> Self {
        match e {
            TaskError::Rules(_) => CliError::Validation(e.to_string()),
            TaskError::Augment(a) => a.into(),
            _ => CliError::Config(e.to_string()),
        }
    }
}

/// Resolve one `--rules` entry: `none`, a shipped name, or a file path.
/// Parse errors are reported with the file they came from.
pub fn read_rules(spec: &str) -> Result<RuleProgram, CliError> {
    if spec == "none" {
        return Ok(RuleProgram::default());
    }
    if let Some((_, program)) = shipped_rules(spec) {
        return Ok(program);
    }
    let path = std::path::Path::new(spec);
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse_rules(&text).map_err(|e| CliError::Validation(format!("{spec}: {e}")))
}

/// Short display name of a rule spec: shipped names as-is, files by stem.
pub fn rules_name(spec: &str) -> String {
    if spec == "none" || shipped_rules(spec).is_some() {
        return spec.to_string();
    }
    let path = std::path::Path::new(spec);
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| spec.to_string())
}

fn with_workers<T>(workers: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T, CliError>
where
    T: Send,
{
    match workers {
        None => Ok(f()),
        Some(0) => Err(CliError::Config("--workers must be at least 1".into())),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| CliError::Config(e.to_string()))?;
            Ok(pool.install(f))
        }
    }
}

/// Run a parsed command, writing the report to `out`.
pub fn run(cli: Cli, out: &mut (dyn Write + Send)) -> Result<(), CliError> {
    match cli.command {
        Command::Check(a) => check::cmd_check(&a, out),
        Command::Train(a) => {
            let cfg = RunConfig::resolve(&a)?;
            with_workers(cfg.workers, || commands::cmd_train(&cfg, out))?
        }
        Command::Eval(a) => with_workers(a.workers, || commands::cmd_eval(&a, out))?,
        Command::Sweep(a) => {
            let cfg = RunConfig::resolve(&a)?;
            with_workers(cfg.workers, || sweep::cmd_sweep(&cfg, out))?
        }
        Command::Gen(a) => commands::cmd_gen(&a, out),
        Command::Graph(a) => commands::cmd_graph(&a, out),
    }
}

/// Entry point of the binary; returns the process exit code.
pub fn main_with_args(args: impl IntoIterator<Item = std::ffi::OsString>) -> i32 {
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let mut stdout = std::io::stdout();
    match run(cli, &mut stdout) {
        Ok(()) => 0,
        Err(e) => {
            let _ = stdout.flush();
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
