//! Settings from an optional TOML file merged with command-line flags.

use std::fs::{self, File};
use std::io::BufReader;
use std::path::{Path, PathBuf};

use anyhow::Context;
use chrono::{DateTime, NaiveDate, Utc};
use serde::Deserialize;
use toktrack::analytics::{BotList, RankKey, Scope};

use crate::{Analysis, AnalyzeArgs, CliError, ProcessArgs, RankArg, ScopeArg, ValidateArgs};

pub const DEFAULT_BATCH_SIZE: usize = 10_000;
pub const DEFAULT_SAMPLE: f64 = 0.01;
pub const DEFAULT_HORIZON_HOURS: u64 = 48;
pub const DEFAULT_MIN_N: u64 = 1000;

/// Keys accepted in a `--config` file. Every key is optional.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct FileConfig {
    pub dump: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub batch_size: Option<usize>,
    pub workers: Option<usize>,
    pub compress: Option<bool>,
    pub dump_date: Option<String>,
    pub sample: Option<f64>,
    pub seed: Option<u64>,
    pub results: Option<PathBuf>,
    pub end: Option<String>,
    pub horizon: Option<u64>,
    pub bot_list: Option<PathBuf>,
    pub scope: Option<ScopeArg>,
    pub min_n: Option<u64>,
    pub rank: Option<RankArg>,
    pub all_tokens: Option<bool>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        toml::from_str(&text)
            .map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))
    }
}

fn required<T>(flag: Option<T>, file: &Option<T>, name: &str) -> Result<T, CliError>
where
    T: Clone,
{
    flag.or_else(|| file.clone())
        .ok_or_else(|| CliError::Usage(format!("--{name} is required")))
}

#[derive(Clone, Debug)]
pub struct ProcessConfig {
    pub dump: PathBuf,
    pub out: PathBuf,
    pub batch_size: usize,
    pub workers: usize,
    pub compress: bool,
    pub dump_date: String,
}

impl ProcessConfig {
    pub fn resolve(a: &ProcessArgs, f: &FileConfig) -> Result<Self, CliError> {
        let dump = required(a.dump.clone(), &f.dump, "dump")?;
        let out = required(a.out.clone(), &f.out, "out")?;
        let batch_size = a.batch_size.or(f.batch_size).unwrap_or(DEFAULT_BATCH_SIZE);
        if batch_size < 1 {
            return Err(CliError::Usage("--batch-size must be at least 1".into()));
        }
        let workers = a.workers.or(f.workers).unwrap_or_else(default_workers);
        if workers < 1 {
            return Err(CliError::Usage("--workers must be at least 1".into()));
        }
        let dump_date = match a.dump_date.clone().or_else(|| f.dump_date.clone()) {
            Some(d) => check_dump_date(&d)?,
            None => dump_date_from_path(&dump).unwrap_or_else(|| "undated".to_owned()),
        };
        Ok(ProcessConfig {
            dump,
            out,
            batch_size,
            workers,
            compress: a.compress || f.compress.unwrap_or(false),
            dump_date,
        })
    }
}

pub fn default_workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

fn check_dump_date(d: &str) -> Result<String, CliError> {
    if d.is_empty() || !d.chars().all(|c| c.is_ascii_alphanumeric()) {
        return Err(CliError::Usage(format!(
            "--dump-date {d:?} must be non-empty and alphanumeric"
        )));
    }
    Ok(d.to_owned())
}

/// The first run of exactly eight digits in the file name, as in
/// `enwiki-20161101-pages-meta-history1.xml.bz2`.
pub fn dump_date_from_path(path: &Path) -> Option<String> {
    let name = path.file_name()?.to_str()?;
    let b = name.as_bytes();
    let mut i = 0;
    while i < b.len() {
        if b[i].is_ascii_digit() {
            let start = i;
            while i < b.len() && b[i].is_ascii_digit() {
                i += 1;
            }
            if i - start == 8 {
                return Some(name[start..i].to_owned());
            }
        } else {
            i += 1;
        }
    }
    None
}

#[derive(Clone, Debug)]
pub struct ValidateConfig {
    pub dump: PathBuf,
    pub out: PathBuf,
    pub sample: f64,
    pub seed: u64,
}

impl ValidateConfig {
    pub fn resolve(a: &ValidateArgs, f: &FileConfig) -> Result<Self, CliError> {
        let sample = a.sample.or(f.sample).unwrap_or(DEFAULT_SAMPLE);
        if !(sample > 0.0 && sample <= 1.0) {
            return Err(CliError::Usage(format!("--sample {sample} must be in (0, 1]")));
        }
        Ok(ValidateConfig {
            dump: required(a.dump.clone(), &f.dump, "dump")?,
            out: required(a.out.clone(), &f.out, "out")?,
            sample,
            seed: a.seed.or(f.seed).unwrap_or(0),
        })
    }
}

#[derive(Clone, Debug)]
pub struct AnalyzeConfig {
    pub analysis: Analysis,
    pub out: PathBuf,
    pub results: PathBuf,
    /// `None` means midnight UTC of the dataset's dump date.
    pub end: Option<DateTime<Utc>>,
    pub horizon: chrono::Duration,
    pub bots: BotList,
    pub scope: Scope,
    pub min_n: u64,
    pub rank: RankKey,
    pub all_tokens: bool,
}

impl AnalyzeConfig {
    pub fn resolve(a: &AnalyzeArgs, f: &FileConfig) -> Result<Self, CliError> {
        let out = required(a.out.clone(), &f.out, "out")?;
        let results = a
            .results
            .clone()
            .or_else(|| f.results.clone())
            .unwrap_or_else(|| out.join("analysis"));
        let end = a
            .end
            .clone()
            .or_else(|| f.end.clone())
            .map(|s| parse_end(&s))
            .transpose()?;
        let hours = a.horizon.or(f.horizon).unwrap_or(DEFAULT_HORIZON_HOURS);
        let horizon = i64::try_from(hours)
            .ok()
            .and_then(chrono::Duration::try_hours)
            .ok_or_else(|| CliError::Usage(format!("--horizon {hours} is too large")))?;
        let bots = match a.bot_list.clone().or_else(|| f.bot_list.clone()) {
            Some(p) => {
                let file = File::open(&p)
                    .with_context(|| format!("opening bot list {}", p.display()))?;
                BotList::from_reader(BufReader::new(file))
                    .with_context(|| format!("reading bot list {}", p.display()))?
            }
            None => BotList::default(),
        };
        let min_n = a.min_n.or(f.min_n).unwrap_or(DEFAULT_MIN_N);
        if min_n < 1 {
            return Err(CliError::Usage("--min-n must be at least 1".into()));
        }
        let scope = match a.scope.or(f.scope).unwrap_or(ScopeArg::Article) {
            ScopeArg::Article => Scope::Article,
            ScopeArg::StringGlobal => Scope::StringGlobal,
            ScopeArg::StringInArticle => Scope::StringInArticle,
        };
        let rank = match a.rank.or(f.rank).unwrap_or(RankArg::Ct) {
            RankArg::Cb => RankKey::Cb,
            RankArg::Ct => RankKey::Ct,
        };
        Ok(AnalyzeConfig {
            analysis: a.analysis,
            out,
            results,
            end,
            horizon,
            bots,
            scope,
            min_n,
            rank,
            all_tokens: a.all_tokens || f.all_tokens.unwrap_or(false),
        })
    }
}

/// Accepts RFC 3339 instants and plain `YYYY-MM-DD` dates (midnight UTC).
pub fn parse_end(s: &str) -> Result<DateTime<Utc>, CliError> {
    if let Ok(t) = DateTime::parse_from_rfc3339(s) {
        return Ok(t.with_timezone(&Utc));
    }
    for fmt in ["%Y-%m-%d", "%Y%m%d"] {
        if let Ok(d) = NaiveDate::parse_from_str(s, fmt) {
            return Ok(d.and_hms_opt(0, 0, 0).expect("midnight").and_utc());
        }
    }
    Err(CliError::Usage(format!(
        "--end {s:?} is neither RFC 3339 nor YYYY-MM-DD"
    )))
}
