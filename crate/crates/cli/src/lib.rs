//! Command-line front end: `process`, `validate` and `analyze`.

pub mod analyze;
pub mod config;
pub mod index;
pub mod process;
pub mod validate;

use std::fmt;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

/// Exit status for a usage error.
pub const EXIT_USAGE: i32 = 1;
/// Exit status for unreadable or inconsistent input.
pub const EXIT_INPUT: i32 = 2;
/// Exit status for a failed validation.
pub const EXIT_VALIDATION: i32 = 3;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Input(anyhow::Error),
    Validation(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Input(_) => EXIT_INPUT,
            CliError::Validation(_) => EXIT_VALIDATION,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Input(e) => write!(f, "{e:#}"),
            CliError::Validation(m) => write!(f, "validation failed: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<anyhow::Error> for CliError {
    fn from(e: anyhow::Error) -> Self {
        CliError::Input(e)
    }
}

#[derive(Parser, Debug)]
#[command(name = "toktrack", version, about = "Token provenance for MediaWiki revision dumps")]
pub struct Cli {
    /// TOML file with default settings; command-line flags take precedence.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Track every article of a dump and write the batch files.
    Process(ProcessArgs),
    /// Recreate sampled revisions from the batch files and compare them with
    /// the dump.
    Validate(ValidateArgs),
    /// Compute survival, conflict or revert statistics from the batch files.
    Analyze(AnalyzeArgs),
}

#[derive(Args, Debug, Default)]
pub struct ProcessArgs {
    /// MediaWiki XML export (.xml, .xml.gz or .xml.bz2).
    #[arg(long)]
    pub dump: Option<PathBuf>,
    /// Output directory for batch files.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Articles per batch file [default: 10000].
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// Worker threads [default: available cores].
    #[arg(long)]
    pub workers: Option<usize>,
    /// Gzip the batch files.
    #[arg(long)]
    pub compress: bool,
    /// Date used in file names [default: the 8-digit date in the dump file name].
    #[arg(long)]
    pub dump_date: Option<String>,
}

#[derive(Args, Debug, Default)]
pub struct ValidateArgs {
    #[arg(long)]
    pub dump: Option<PathBuf>,
    /// Directory written by `process`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Fraction of revisions to check, in (0, 1] [default: 0.01].
    #[arg(long)]
    pub sample: Option<f64>,
    /// Seed for revision sampling [default: 0].
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Analysis {
    Survival,
    Conflict,
    Reverts,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScopeArg {
    Article,
    StringGlobal,
    StringInArticle,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RankArg {
    Cb,
    Ct,
}

#[derive(Args, Debug)]
pub struct AnalyzeArgs {
    #[arg(value_enum)]
    pub analysis: Analysis,
    /// Directory written by `process`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Where result tables go [default: <out>/analysis].
    #[arg(long)]
    pub results: Option<PathBuf>,
    /// Dataset end instant, RFC 3339 or YYYY-MM-DD [default: midnight UTC of the dump date].
    #[arg(long)]
    pub end: Option<String>,
    /// Survival horizon in hours [default: 48].
    #[arg(long)]
    pub horizon: Option<u64>,
    /// Newline-delimited bot user ids (or names).
    #[arg(long)]
    pub bot_list: Option<PathBuf>,
    /// Conflict aggregation scope [default: article].
    #[arg(long, value_enum)]
    pub scope: Option<ScopeArg>,
    /// Minimum global frequency for string rankings [default: 1000].
    #[arg(long)]
    pub min_n: Option<u64>,
    /// Sum that orders conflict rankings [default: ct].
    #[arg(long, value_enum)]
    pub rank: Option<RankArg>,
    /// Score all tokens, not only those present at the end.
    #[arg(long)]
    pub all_tokens: bool,
}

/// Runs a parsed command line.
pub fn run(cli: Cli) -> Result<(), CliError> {
    let file = match &cli.config {
        Some(p) => config::FileConfig::load(p)?,
        None => config::FileConfig::default(),
    };
    match cli.command {
        Command::Process(args) => {
            let cfg = config::ProcessConfig::resolve(&args, &file)?;
            let report = process::process(&cfg)?;
            println!("{}", report.summary());
            Ok(())
        }
        Command::Validate(args) => {
            let cfg = config::ValidateConfig::resolve(&args, &file)?;
            let report = validate::validate(&cfg)?;
            println!("{}", report.render());
            if report.mismatches.is_empty() {
                Ok(())
            } else {
                Err(CliError::Validation(format!(
                    "{} of {} sampled revisions differ",
                    report.mismatches.len(),
                    report.revisions_checked
                )))
            }
        }
        Command::Analyze(args) => {
            let cfg = config::AnalyzeConfig::resolve(&args, &file)?;
            let summary = analyze::analyze(&cfg)?;
            println!("{summary}");
            Ok(())
        }
    }
}
