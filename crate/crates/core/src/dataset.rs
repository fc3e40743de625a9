//! Batch CSV files for token and revision data.
//!
//! A batch file holds the rows of a contiguous range of articles and is named
//! `<dump date>-<output type>-<batch id>-<first page id>-<last page id>.csv`,
//! optionally followed by `.gz`. Files are UTF-8 with a header row, comma
//! delimiters, double-quote quoting and LF line endings. Integer lists are
//! written as one quoted field such as `"[5,17]"` or `"[]"`.

use std::fmt::{self, Write as _};
use std::fs::{self, File};
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use chrono::{DateTime, NaiveDateTime, Utc};
use flate2::read::MultiGzDecoder;
use flate2::write::GzEncoder;
use flate2::GzBuilder;

use crate::dump::EditorId;
use crate::tracker::{FinalizedArticle, TokenHistory};

/// Timestamp layout used in revision rows.
pub const TIMESTAMP_FORMAT: &str = "%Y-%m-%dT%H:%M:%SZ";

#[derive(Debug, thiserror::Error)]
pub enum DatasetError {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Format {
        path: PathBuf,
        line: u64,
        message: String,
    },
    #[error("file name {0:?} does not match <date>-<type>-<batch>-<first>-<last>.csv[.gz]")]
    FileName(String),
    #[error("row for page {page_id} lies outside batch range {first}..={last}")]
    OutOfRange { page_id: u64, first: u64, last: u64 },
    #[error("rows are not sorted at row {index}")]
    Unsorted { index: usize },
    #[error("{row} rows cannot be written to a {output} batch")]
    WrongOutputType { row: OutputType, output: OutputType },
    #[error("invalid batch range {first}..={last}")]
    BadRange { first: u64, last: u64 },
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> DatasetError + '_ {
    move |source| DatasetError::Io {
        path: path.to_owned(),
        source,
    }
}

/// The kinds of batch file.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum OutputType {
    /// Tokens present in each article's last revision.
    CurrentContent,
    /// Tokens deleted by each article's last revision.
    DeletedContent,
    /// Revision metadata.
    Revisions,
    /// Content hashes of revisions, used for identity revert detection.
    RevisionHashes,
}

impl OutputType {
    pub const ALL: [OutputType; 4] = [
        OutputType::CurrentContent,
        OutputType::DeletedContent,
        OutputType::Revisions,
        OutputType::RevisionHashes,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            OutputType::CurrentContent => "current_content",
            OutputType::DeletedContent => "deleted_content",
            OutputType::Revisions => "revisions",
            OutputType::RevisionHashes => "revision_hashes",
        }
    }
}

impl fmt::Display for OutputType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for OutputType {
    type Err = ();
    fn from_str(s: &str) -> Result<Self, ()> {
        OutputType::ALL.into_iter().find(|t| t.as_str() == s).ok_or(())
    }
}

/// Identifies one batch file.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct BatchDescriptor {
    /// Dump date as it appears in the dump file name, e.g. `20161101`.
    pub dump_date: String,
    pub output_type: OutputType,
    pub batch_id: u64,
    pub first_page_id: u64,
    pub last_page_id: u64,
}

impl BatchDescriptor {
    pub fn file_name(&self, compressed: bool) -> String {
        format!(
            "{}-{}-{}-{}-{}.csv{}",
            self.dump_date,
            self.output_type,
            self.batch_id,
            self.first_page_id,
            self.last_page_id,
            if compressed { ".gz" } else { "" }
        )
    }

    /// Parses a batch file name. Returns the descriptor and whether the file
    /// is gzip-compressed.
    pub fn parse_file_name(name: &str) -> Result<(Self, bool), DatasetError> {
        let bad = || DatasetError::FileName(name.to_owned());
        let (stem, compressed) = if let Some(s) = name.strip_suffix(".csv.gz") {
            (s, true)
        } else if let Some(s) = name.strip_suffix(".csv") {
            (s, false)
        } else {
            return Err(bad());
        };
        // the date may itself contain dashes, so split from the right
        let mut parts = stem.rsplitn(5, '-');
        let last = parts.next().ok_or_else(bad)?;
        let first = parts.next().ok_or_else(bad)?;
        let batch = parts.next().ok_or_else(bad)?;
        let kind = parts.next().ok_or_else(bad)?;
        let date = parts.next().ok_or_else(bad)?;
        let num = |s: &str| -> Result<u64, DatasetError> {
            if s.is_empty() || !s.bytes().all(|b| b.is_ascii_digit()) {
                return Err(bad());
            }
            s.parse().map_err(|_| bad())
        };
        if date.is_empty() {
            return Err(bad());
        }
        let d = BatchDescriptor {
            dump_date: date.to_owned(),
            output_type: kind.parse().map_err(|_| bad())?,
            batch_id: num(batch)?,
            first_page_id: num(first)?,
            last_page_id: num(last)?,
        };
        if d.first_page_id > d.last_page_id {
            return Err(bad());
        }
        Ok((d, compressed))
    }

    fn contains(&self, page_id: u64) -> bool {
        (self.first_page_id..=self.last_page_id).contains(&page_id)
    }
}

/// A token row of a `current_content` or `deleted_content` batch.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ContentRow {
    pub page_id: u64,
    pub last_rev_id: u64,
    pub token_id: u64,
    pub str: String,
    pub origin_rev_id: u64,
    pub outs: Vec<u64>,
    pub ins: Vec<u64>,
}

impl ContentRow {
    pub fn from_history(page_id: u64, h: &TokenHistory) -> Self {
        ContentRow {
            page_id,
            last_rev_id: h.last_rev_id,
            token_id: h.token_id,
            str: h.str.clone(),
            origin_rev_id: h.origin_rev_id,
            outs: h.outs.clone(),
            ins: h.ins.clone(),
        }
    }

    pub fn to_history(&self) -> TokenHistory {
        TokenHistory {
            token_id: self.token_id,
            str: self.str.clone(),
            origin_rev_id: self.origin_rev_id,
            outs: self.outs.clone(),
            ins: self.ins.clone(),
            last_rev_id: self.last_rev_id,
        }
    }

    pub fn is_present(&self) -> bool {
        self.outs.len() == self.ins.len()
    }
}

/// Current and deleted content rows of a finalized article.
pub fn content_rows(article: &FinalizedArticle) -> (Vec<ContentRow>, Vec<ContentRow>) {
    let rows = |hs: &[TokenHistory]| {
        hs.iter()
            .map(|h| ContentRow::from_history(article.page_id, h))
            .collect()
    };
    (rows(&article.current), rows(&article.deleted))
}

/// A row of a `revisions` batch.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct RevisionRow {
    pub page_id: u64,
    pub rev_id: u64,
    pub timestamp: DateTime<Utc>,
    pub editor: EditorId,
}

/// A row of a `revision_hashes` batch.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct RevisionHashRow {
    pub page_id: u64,
    pub rev_id: u64,
    /// Lowercase hex SHA-1 of the revision text.
    pub sha1: String,
}

/// A row type that can live in a batch file.
pub trait BatchRow: Sized {
    const HEADER: &'static [&'static str];
    fn page_id(&self) -> u64;
    /// Within-page ordering key.
    fn sort_key(&self) -> u64;
    fn accepts(output: OutputType) -> bool;
    fn kind() -> OutputType;
    fn write_fields(&self, out: &mut String);
    fn parse(record: &csv::StringRecord) -> Result<Self, String>;
}

fn push_field(out: &mut String, s: &str) {
    if s.contains([',', '"', '\n', '\r']) || s.is_empty() {
        out.push('"');
        for c in s.chars() {
            if c == '"' {
                out.push('"');
            }
            out.push(c);
        }
        out.push('"');
    } else {
        out.push_str(s);
    }
}

fn push_list(out: &mut String, xs: &[u64]) {
    out.push_str("\"[");
    for (i, x) in xs.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        let _ = write!(out, "{x}");
    }
    out.push_str("]\"");
}

fn parse_list(s: &str) -> Result<Vec<u64>, String> {
    let inner = s
        .strip_prefix('[')
        .and_then(|r| r.strip_suffix(']'))
        .ok_or_else(|| format!("malformed list literal {s:?}"))?;
    if inner.is_empty() {
        return Ok(Vec::new());
    }
    inner
        .split(',')
        .map(|x| {
            if x.is_empty() || !x.bytes().all(|b| b.is_ascii_digit()) {
                return Err(format!("malformed list literal {s:?}"));
            }
            x.parse::<u64>()
                .map_err(|_| format!("malformed list literal {s:?}"))
        })
        .collect()
}

fn field<'r>(r: &'r csv::StringRecord, i: usize, name: &str) -> Result<&'r str, String> {
    r.get(i).ok_or_else(|| format!("missing column {name}"))
}

fn parse_u64(r: &csv::StringRecord, i: usize, name: &str) -> Result<u64, String> {
    let s = field(r, i, name)?;
    if s.is_empty() || !s.bytes().all(|b| b.is_ascii_digit()) {
        return Err(format!("invalid {name} {s:?}"));
    }
    s.parse().map_err(|_| format!("invalid {name} {s:?}"))
}

impl BatchRow for ContentRow {
    const HEADER: &'static [&'static str] = &[
        "page_id",
        "last_rev_id",
        "token_id",
        "str",
        "origin_rev_id",
        "out",
        "in",
    ];

    fn page_id(&self) -> u64 {
        self.page_id
    }

    fn sort_key(&self) -> u64 {
        self.token_id
    }

    fn accepts(output: OutputType) -> bool {
        matches!(output, OutputType::CurrentContent | OutputType::DeletedContent)
    }

    fn kind() -> OutputType {
        OutputType::CurrentContent
    }

    fn write_fields(&self, out: &mut String) {
        let _ = write!(out, "{},{},{},", self.page_id, self.last_rev_id, self.token_id);
        push_field(out, &self.str);
        let _ = write!(out, ",{},", self.origin_rev_id);
        push_list(out, &self.outs);
        out.push(',');
        push_list(out, &self.ins);
    }

    fn parse(r: &csv::StringRecord) -> Result<Self, String> {
        Ok(ContentRow {
            page_id: parse_u64(r, 0, "page_id")?,
            last_rev_id: parse_u64(r, 1, "last_rev_id")?,
            token_id: parse_u64(r, 2, "token_id")?,
            str: field(r, 3, "str")?.to_owned(),
            origin_rev_id: parse_u64(r, 4, "origin_rev_id")?,
            outs: parse_list(field(r, 5, "out")?)?,
            ins: parse_list(field(r, 6, "in")?)?,
        })
    }
}

impl BatchRow for RevisionRow {
    const HEADER: &'static [&'static str] = &["page_id", "rev_id", "timestamp", "editor"];

    fn page_id(&self) -> u64 {
        self.page_id
    }

    fn sort_key(&self) -> u64 {
        self.rev_id
    }

    fn accepts(output: OutputType) -> bool {
        output == OutputType::Revisions
    }

    fn kind() -> OutputType {
        OutputType::Revisions
    }

    fn write_fields(&self, out: &mut String) {
        let _ = write!(
            out,
            "{},{},{},",
            self.page_id,
            self.rev_id,
            self.timestamp.format(TIMESTAMP_FORMAT)
        );
        push_field(out, &self.editor.to_string());
    }

    fn parse(r: &csv::StringRecord) -> Result<Self, String> {
        let ts = field(r, 2, "timestamp")?;
        let timestamp = NaiveDateTime::parse_from_str(ts, TIMESTAMP_FORMAT)
            .map_err(|e| format!("invalid timestamp {ts:?}: {e}"))?
            .and_utc();
        Ok(RevisionRow {
            page_id: parse_u64(r, 0, "page_id")?,
            rev_id: parse_u64(r, 1, "rev_id")?,
            timestamp,
            editor: field(r, 3, "editor")?.parse().map_err(|e| format!("{e}"))?,
        })
    }
}

impl BatchRow for RevisionHashRow {
    const HEADER: &'static [&'static str] = &["page_id", "rev_id", "sha1"];

    fn page_id(&self) -> u64 {
        self.page_id
    }

    fn sort_key(&self) -> u64 {
        self.rev_id
    }

    fn accepts(output: OutputType) -> bool {
        output == OutputType::RevisionHashes
    }

    fn kind() -> OutputType {
        OutputType::RevisionHashes
    }

    fn write_fields(&self, out: &mut String) {
        let _ = write!(out, "{},{},", self.page_id, self.rev_id);
        push_field(out, &self.sha1);
    }

    fn parse(r: &csv::StringRecord) -> Result<Self, String> {
        let sha1 = field(r, 2, "sha1")?;
        if sha1.len() != 40 || !sha1.bytes().all(|b| b.is_ascii_hexdigit()) {
            return Err(format!("invalid sha1 {sha1:?}"));
        }
        Ok(RevisionHashRow {
            page_id: parse_u64(r, 0, "page_id")?,
            rev_id: parse_u64(r, 1, "rev_id")?,
            sha1: sha1.to_ascii_lowercase(),
        })
    }
}

enum Sink {
    Plain(BufWriter<File>),
    Gzip(GzEncoder<BufWriter<File>>),
}

impl Sink {
    fn writer(&mut self) -> &mut dyn Write {
        match self {
            Sink::Plain(w) => w,
            Sink::Gzip(w) => w,
        }
    }
}

/// Streams rows into one batch file.
///
/// Rows go to a temporary file next to the target, which is renamed into
/// place by [`BatchWriter::finish`]. Dropping an unfinished writer leaves
/// only the temporary file behind.
pub struct BatchWriter<R: BatchRow> {
    descriptor: BatchDescriptor,
    tmp_path: PathBuf,
    final_path: PathBuf,
    sink: Sink,
    line: String,
    last: Option<(u64, u64)>,
    rows: usize,
    _row: std::marker::PhantomData<R>,
}

impl<R: BatchRow> BatchWriter<R> {
    pub fn create(
        dir: &Path,
        descriptor: BatchDescriptor,
        compress: bool,
    ) -> Result<Self, DatasetError> {
        if !R::accepts(descriptor.output_type) {
            return Err(DatasetError::WrongOutputType {
                row: R::kind(),
                output: descriptor.output_type,
            });
        }
        if descriptor.first_page_id > descriptor.last_page_id {
            return Err(DatasetError::BadRange {
                first: descriptor.first_page_id,
                last: descriptor.last_page_id,
            });
        }
        let name = descriptor.file_name(compress);
        let final_path = dir.join(&name);
        let tmp_path = dir.join(format!("{name}.tmp"));
        let file = File::create(&tmp_path).map_err(io_err(&tmp_path))?;
        let buf = BufWriter::with_capacity(1 << 16, file);
        let sink = if compress {
            // fixed header fields keep compressed output reproducible
            Sink::Gzip(GzBuilder::new().mtime(0).write(buf, flate2::Compression::default()))
        } else {
            Sink::Plain(buf)
        };
        let mut w = BatchWriter {
            descriptor,
            tmp_path,
            final_path,
            sink,
            line: String::new(),
            last: None,
            rows: 0,
            _row: std::marker::PhantomData,
        };
        w.line.push_str(&R::HEADER.join(","));
        w.line.push('\n');
        w.flush_line()?;
        Ok(w)
    }

    fn flush_line(&mut self) -> Result<(), DatasetError> {
        let path = &self.tmp_path;
        self.sink
            .writer()
            .write_all(self.line.as_bytes())
            .map_err(io_err(path))?;
        self.line.clear();
        Ok(())
    }

    pub fn write_row(&mut self, row: &R) -> Result<(), DatasetError> {
        let page_id = row.page_id();
        if !self.descriptor.contains(page_id) {
            return Err(DatasetError::OutOfRange {
                page_id,
                first: self.descriptor.first_page_id,
                last: self.descriptor.last_page_id,
            });
        }
        let key = (page_id, row.sort_key());
        if self.last.is_some_and(|last| key <= last) {
            return Err(DatasetError::Unsorted { index: self.rows });
        }
        self.last = Some(key);
        row.write_fields(&mut self.line);
        self.line.push('\n');
        self.rows += 1;
        self.flush_line()
    }

    pub fn rows_written(&self) -> usize {
        self.rows
    }

    pub fn descriptor(&self) -> &BatchDescriptor {
        &self.descriptor
    }

    /// Flushes, closes and moves the file to its final name.
    pub fn finish(self) -> Result<PathBuf, DatasetError> {
        let last = self.descriptor.last_page_id;
        self.finish_with_last_page(last)
    }

    /// Like [`finish`](Self::finish), but narrows the batch range to end at
    /// `last_page_id`. Useful when the writer was opened before the range
    /// was known.
    pub fn finish_with_last_page(mut self, last_page_id: u64) -> Result<PathBuf, DatasetError> {
        let first = self.descriptor.first_page_id;
        if last_page_id < first {
            return Err(DatasetError::BadRange {
                first,
                last: last_page_id,
            });
        }
        if let Some((page_id, _)) = self.last.filter(|(p, _)| *p > last_page_id) {
            return Err(DatasetError::OutOfRange {
                page_id,
                first,
                last: last_page_id,
            });
        }
        self.descriptor.last_page_id = last_page_id;
        let compressed = matches!(self.sink, Sink::Gzip(_));
        self.final_path = self
            .final_path
            .with_file_name(self.descriptor.file_name(compressed));
        let path = self.tmp_path.clone();
        let file = match self.sink {
            Sink::Plain(w) => w.into_inner().map_err(|e| io_err(&path)(e.into_error()))?,
            Sink::Gzip(w) => {
                let buf = w.finish().map_err(io_err(&path))?;
                buf.into_inner().map_err(|e| io_err(&path)(e.into_error()))?
            }
        };
        file.sync_all().map_err(io_err(&path))?;
        drop(file);
        fs::rename(&path, &self.final_path).map_err(io_err(&path))?;
        Ok(self.final_path)
    }
}

/// Writes `rows` as one batch file in `dir` and returns its path.
///
/// Rows must be sorted by page id and then by token id (content) or
/// revision id (revisions, hashes), and fall inside the descriptor's range.
pub fn write_batch<R: BatchRow>(
    rows: &[R],
    descriptor: &BatchDescriptor,
    dir: &Path,
    compress: bool,
) -> Result<PathBuf, DatasetError> {
    let mut w = BatchWriter::<R>::create(dir, descriptor.clone(), compress)?;
    for r in rows {
        w.write_row(r)?;
    }
    w.finish()
}

/// Rows of one batch file.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum BatchRows {
    Content(Vec<ContentRow>),
    Revisions(Vec<RevisionRow>),
    RevisionHashes(Vec<RevisionHashRow>),
}

impl BatchRows {
    pub fn len(&self) -> usize {
        match self {
            BatchRows::Content(r) => r.len(),
            BatchRows::Revisions(r) => r.len(),
            BatchRows::RevisionHashes(r) => r.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

fn open_reader(path: &Path, compressed: bool) -> Result<Box<dyn Read>, DatasetError> {
    let file = File::open(path).map_err(io_err(path))?;
    let buf = BufReader::new(file);
    Ok(if compressed {
        Box::new(MultiGzDecoder::new(buf))
    } else {
        Box::new(buf)
    })
}

/// Reads every row of a batch file of row type `R`.
pub fn read_rows<R: BatchRow>(path: &Path) -> Result<(BatchDescriptor, Vec<R>), DatasetError> {
    let name = path
        .file_name()
        .and_then(|n| n.to_str())
        .ok_or_else(|| DatasetError::FileName(path.display().to_string()))?;
    let (descriptor, compressed) = BatchDescriptor::parse_file_name(name)?;
    if !R::accepts(descriptor.output_type) {
        return Err(DatasetError::WrongOutputType {
            row: R::kind(),
            output: descriptor.output_type,
        });
    }
    let format_err = |line: u64, message: String| DatasetError::Format {
        path: path.to_owned(),
        line,
        message,
    };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(open_reader(path, compressed)?);
    let header = reader.headers().map_err(|e| format_err(1, e.to_string()))?;
    if header.iter().ne(R::HEADER.iter().copied()) {
        return Err(format_err(1, format!("expected header {:?}", R::HEADER.join(","))));
    }
    let mut rows = Vec::new();
    let mut record = csv::StringRecord::new();
    loop {
        let line = reader.position().line();
        match reader.read_record(&mut record) {
            Ok(false) => break,
            Ok(true) => {}
            Err(e) => {
                let line = e.position().map_or(line, |p| p.line());
                return Err(format_err(line, e.to_string()));
            }
        }
        let line = record.position().map_or(line, |p| p.line());
        if record.len() != R::HEADER.len() {
            return Err(format_err(
                line,
                format!("expected {} columns, found {}", R::HEADER.len(), record.len()),
            ));
        }
        let row = R::parse(&record).map_err(|m| format_err(line, m))?;
        if !descriptor.contains(row.page_id()) {
            return Err(format_err(
                line,
                format!("page {} outside the batch range", row.page_id()),
            ));
        }
        rows.push(row);
    }
    Ok((descriptor, rows))
}

/// Reads a batch file of any output type.
pub fn read_batch(path: &Path) -> Result<(BatchDescriptor, BatchRows), DatasetError> {
    let name = path
        .file_name()
        .and_then(|n| n.to_str())
        .ok_or_else(|| DatasetError::FileName(path.display().to_string()))?;
    let (d, _) = BatchDescriptor::parse_file_name(name)?;
    Ok(match d.output_type {
        OutputType::CurrentContent | OutputType::DeletedContent => {
            let (d, r) = read_rows::<ContentRow>(path)?;
            (d, BatchRows::Content(r))
        }
        OutputType::Revisions => {
            let (d, r) = read_rows::<RevisionRow>(path)?;
            (d, BatchRows::Revisions(r))
        }
        OutputType::RevisionHashes => {
            let (d, r) = read_rows::<RevisionHashRow>(path)?;
            (d, BatchRows::RevisionHashes(r))
        }
    })
}

/// Lists the batch files in `dir`, sorted by output type and batch id.
pub fn list_batches(dir: &Path) -> Result<Vec<(BatchDescriptor, PathBuf)>, DatasetError> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).map_err(io_err(dir))? {
        let entry = entry.map_err(io_err(dir))?;
        let name = entry.file_name();
        let Some(name) = name.to_str() else { continue };
        if let Ok((d, _)) = BatchDescriptor::parse_file_name(name) {
            out.push((d, entry.path()));
        }
    }
    out.sort_by(|a, b| {
        (a.0.output_type, a.0.batch_id, &a.1).cmp(&(b.0.output_type, b.0.batch_id, &b.1))
    });
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{toy_revisions, TOY_PAGE_ID};
    use crate::tracker::track_revisions;
    use chrono::TimeZone;
    use proptest::prelude::*;

    fn desc(t: OutputType, first: u64, last: u64) -> BatchDescriptor {
        BatchDescriptor {
            dump_date: "20161101".into(),
            output_type: t,
            batch_id: 3,
            first_page_id: first,
            last_page_id: last,
        }
    }

    #[test]
    fn file_name_pattern() {
        let d = desc(OutputType::CurrentContent, 1000, 1999);
        assert_eq!(d.file_name(false), "20161101-current_content-3-1000-1999.csv");
        assert_eq!(d.file_name(true), "20161101-current_content-3-1000-1999.csv.gz");
        assert_eq!(
            BatchDescriptor::parse_file_name("20161101-current_content-3-1000-1999.csv.gz").unwrap(),
            (d, true)
        );
        let dashed = BatchDescriptor::parse_file_name("2016-11-01-revisions-0-5-9.csv").unwrap().0;
        assert_eq!(dashed.dump_date, "2016-11-01");
        for bad in [
            "20161101-current_content-3-1000.csv",
            "20161101-nonsense-3-1-2.csv",
            "20161101-revisions-3-9-2.csv",
            "20161101-revisions-x-1-2.csv",
            "20161101-revisions-1-1-2.tsv",
            "-revisions-1-1-2.csv",
        ] {
            assert!(BatchDescriptor::parse_file_name(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn toy_row_for_token_ten() {
        let t = track_revisions(TOY_PAGE_ID, &toy_revisions()).unwrap();
        let (current, _) = content_rows(&t.article);
        let dir = tempfile::tempdir().unwrap();
        let p = write_batch(&current, &desc(OutputType::CurrentContent, 42, 42), dir.path(), false)
            .unwrap();
        let text = fs::read_to_string(p).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "page_id,last_rev_id,token_id,str,origin_rev_id,out,in");
        assert!(lines.contains(&"42,1004,10,were,1002,\"[1003]\",\"[1004]\""), "{text}");
        assert!(lines.contains(&"42,1004,11,very,1002,\"[]\",\"[]\""), "{text}");
    }

    #[test]
    fn empty_batch_is_header_only() {
        let dir = tempfile::tempdir().unwrap();
        let d = desc(OutputType::Revisions, 0, 0);
        let p = write_batch::<RevisionRow>(&[], &d, dir.path(), false).unwrap();
        assert_eq!(fs::read_to_string(&p).unwrap(), "page_id,rev_id,timestamp,editor\n");
        assert_eq!(read_batch(&p).unwrap(), (d, BatchRows::Revisions(vec![])));
    }

    #[test]
    fn unregistered_editor_field() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x-revisions-0-1-1.csv");
        fs::write(&p, "page_id,rev_id,timestamp,editor\n1,5,2016-10-31T23:59:59Z,0|203.0.113.7\n")
            .unwrap();
        let (_, rows) = read_rows::<RevisionRow>(&p).unwrap();
        assert_eq!(rows[0].editor, EditorId::Unregistered("203.0.113.7".into()));
        assert_eq!(rows[0].timestamp, Utc.with_ymd_and_hms(2016, 10, 31, 23, 59, 59).unwrap());
    }

    #[test]
    fn malformed_list_reports_line() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x-deleted_content-0-1-1.csv");
        fs::write(
            &p,
            "page_id,last_rev_id,token_id,str,origin_rev_id,out,in\n1,2,1,a,1,\"[2]\",\"[]\"\n1,2,2,b,1,\"[3\",\"[]\"\n",
        )
        .unwrap();
        match read_batch(&p) {
            Err(DatasetError::Format { line, message, .. }) => {
                assert_eq!(line, 3);
                assert!(message.contains("[3"), "{message}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn missing_column_and_bad_header() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x-revisions-0-1-1.csv");
        fs::write(&p, "page_id,rev_id,timestamp,editor\n1,5,2016-10-31T23:59:59Z\n").unwrap();
        assert!(matches!(read_batch(&p), Err(DatasetError::Format { line: 2, .. })));
        fs::write(&p, "page_id,rev,timestamp,editor\n").unwrap();
        assert!(matches!(read_batch(&p), Err(DatasetError::Format { line: 1, .. })));
    }

    #[test]
    fn writer_rejects_contract_violations() {
        let dir = tempfile::tempdir().unwrap();
        let row = |page_id, token_id| ContentRow {
            page_id,
            last_rev_id: 1,
            token_id,
            str: "a".into(),
            origin_rev_id: 1,
            outs: vec![],
            ins: vec![],
        };
        let d = desc(OutputType::CurrentContent, 10, 20);
        assert!(matches!(
            write_batch(&[row(21, 1)], &d, dir.path(), false),
            Err(DatasetError::OutOfRange { page_id: 21, .. })
        ));
        assert!(matches!(
            write_batch(&[row(10, 2), row(10, 1)], &d, dir.path(), false),
            Err(DatasetError::Unsorted { index: 1 })
        ));
        assert!(matches!(
            write_batch(&[row(10, 1)], &desc(OutputType::Revisions, 10, 20), dir.path(), false),
            Err(DatasetError::WrongOutputType { .. })
        ));
        assert!(!dir.path().join(d.file_name(false)).exists());
    }

    #[test]
    fn open_range_is_narrowed_on_finish() {
        let dir = tempfile::tempdir().unwrap();
        let row = |page_id| RevisionHashRow {
            page_id,
            rev_id: 1,
            sha1: "da39a3ee5e6b4b0d3255bfef95601890afd80709".into(),
        };
        let mut w = BatchWriter::create(dir.path(), desc(OutputType::RevisionHashes, 5, u64::MAX), false)
            .unwrap();
        w.write_row(&row(5)).unwrap();
        w.write_row(&row(9)).unwrap();
        let p = w.finish_with_last_page(9).unwrap();
        assert!(p.ends_with("20161101-revision_hashes-3-5-9.csv"));
        assert_eq!(read_rows::<RevisionHashRow>(&p).unwrap().1, vec![row(5), row(9)]);

        let mut w = BatchWriter::create(dir.path(), desc(OutputType::RevisionHashes, 5, u64::MAX), false)
            .unwrap();
        w.write_row(&row(9)).unwrap();
        assert!(w.finish_with_last_page(8).is_err());
    }

    #[test]
    fn gzip_output_is_reproducible() {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let t = track_revisions(TOY_PAGE_ID, &toy_revisions()).unwrap();
        let (_, deleted) = content_rows(&t.article);
        let d = desc(OutputType::DeletedContent, 42, 42);
        let pa = write_batch(&deleted, &d, a.path(), true).unwrap();
        let pb = write_batch(&deleted, &d, b.path(), true).unwrap();
        assert_eq!(fs::read(&pa).unwrap(), fs::read(&pb).unwrap());
        assert_eq!(read_batch(&pa).unwrap().1, BatchRows::Content(deleted));
    }

    fn arb_str() -> impl Strategy<Value = String> {
        prop_oneof![
            "[a-z0-9]{1,8}",
            Just(",".to_string()),
            Just("\"".to_string()),
            Just("'''".to_string()),
            "[^\\s]{1,3}",
        ]
    }

    fn arb_rows() -> impl Strategy<Value = Vec<ContentRow>> {
        proptest::collection::vec(
            (
                1u64..50,
                1u64..1_000_000,
                arb_str(),
                1u64..1_000_000,
                proptest::collection::vec(1u64..u64::MAX, 0..4),
                proptest::collection::vec(1u64..u64::MAX, 0..4),
            ),
            0..60,
        )
        .prop_map(|raw| {
            let mut rows: Vec<ContentRow> = raw
                .into_iter()
                .enumerate()
                .map(|(i, (page_id, last, s, origin, outs, ins))| ContentRow {
                    page_id,
                    last_rev_id: last,
                    token_id: i as u64 + 1,
                    str: s,
                    origin_rev_id: origin,
                    outs,
                    ins,
                })
                .collect();
            rows.sort_by_key(|r| (r.page_id, r.token_id));
            rows
        })
    }

    proptest! {
        #[test]
        fn content_round_trip(rows in arb_rows(), compress in any::<bool>()) {
            let dir = tempfile::tempdir().unwrap();
            let d = desc(OutputType::DeletedContent, 1, 50);
            let p = write_batch(&rows, &d, dir.path(), compress).unwrap();
            let (d2, back) = read_rows::<ContentRow>(&p).unwrap();
            prop_assert_eq!(&d2, &d);
            prop_assert_eq!(&back, &rows);
            let again = tempfile::tempdir().unwrap();
            let p2 = write_batch(&back, &d, again.path(), compress).unwrap();
            prop_assert_eq!(fs::read(&p).unwrap(), fs::read(&p2).unwrap());
        }

        #[test]
        fn revision_round_trip(raw in proptest::collection::vec(
            (1u64..20, 0i64..2_000_000_000, prop_oneof![
                (1u64..u64::MAX).prop_map(EditorId::Registered),
                "[0-9a-f:.,\"]{1,20}".prop_map(EditorId::Unregistered),
            ]), 0..40)) {
            let mut rows: Vec<RevisionRow> = raw.into_iter().enumerate().map(|(i, (p, ts, e))| RevisionRow {
                page_id: p,
                rev_id: i as u64 + 1,
                timestamp: Utc.timestamp_opt(ts, 0).unwrap(),
                editor: e,
            }).collect();
            rows.sort_by_key(|r| (r.page_id, r.rev_id));
            let dir = tempfile::tempdir().unwrap();
            let p = write_batch(&rows, &desc(OutputType::Revisions, 1, 20), dir.path(), false).unwrap();
            prop_assert_eq!(read_rows::<RevisionRow>(&p).unwrap().1, rows);
        }
    }
}
