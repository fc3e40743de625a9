//! `process`: dump in, batch files out.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::thread;
use std::time::Instant;

use anyhow::{bail, Context};
use crossbeam_channel::{bounded, Receiver, Sender};
use serde::{Deserialize, Serialize};
use toktrack::dataset::{
    content_rows, BatchDescriptor, BatchWriter, ContentRow, OutputType, RevisionHashRow,
    RevisionRow,
};
use toktrack::dump::{content_hash, is_redirect, open_dump, Compression, DumpStats};
use toktrack::tracker::track_revisions;
use toktrack::PageRecord;

use crate::config::ProcessConfig;
use crate::index::{
    dir_for, done_marker, AUX_DIR, COMPLETE_MARKER, PROGRESS_DIR, RUN_MANIFEST, RUN_REPORT,
};

/// Settings that must match for a run to resume in an existing directory.
#[derive(Debug, PartialEq, Serialize, Deserialize)]
struct Manifest {
    dump_file: String,
    dump_bytes: u64,
    dump_date: String,
    batch_size: usize,
    compress: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct PageFailure {
    pub page_id: u64,
    pub error: String,
}

/// Summary of a `process` run, also written as `run_report.json`.
#[derive(Clone, Debug, Default, Serialize)]
pub struct RunReport {
    pub dump: String,
    pub dump_date: String,
    pub batch_size: usize,
    pub workers: usize,
    pub compress: bool,
    pub pages_seen: u64,
    /// Pages tracked in this invocation.
    pub pages_processed: u64,
    /// Pages in batches finished by an earlier invocation.
    pub pages_resumed: u64,
    pub pages_failed: u64,
    pub pages_skipped_namespace: u64,
    pub pages_skipped_redirect: u64,
    pub pages_skipped_no_text: u64,
    pub revisions_seen: u64,
    pub revisions_tracked: u64,
    pub revisions_suppressed: u64,
    pub tokens_created: u64,
    pub tokens_current: u64,
    pub batches: u64,
    pub batches_resumed: u64,
    pub sha1_mismatches: u64,
    pub failures: Vec<PageFailure>,
    pub wall_seconds: f64,
}

impl RunReport {
    pub fn summary(&self) -> String {
        format!(
            "pages: {} seen, {} processed, {} resumed, {} failed, skipped {} namespace / {} redirect / {} no text\n\
             revisions: {} tracked, {} suppressed\n\
             tokens: {} created, {} current\n\
             batches: {} ({} resumed)\n\
             wall time: {:.1} s",
            self.pages_seen,
            self.pages_processed,
            self.pages_resumed,
            self.pages_failed,
            self.pages_skipped_namespace,
            self.pages_skipped_redirect,
            self.pages_skipped_no_text,
            self.revisions_tracked,
            self.revisions_suppressed,
            self.tokens_created,
            self.tokens_current,
            self.batches,
            self.batches_resumed,
            self.wall_seconds,
        )
    }
}

/// Rows produced for one article.
#[derive(Debug, Default)]
struct ArticleRows {
    current: Vec<ContentRow>,
    deleted: Vec<ContentRow>,
    revisions: Vec<RevisionRow>,
    hashes: Vec<RevisionHashRow>,
    suppressed: u64,
}

struct Job {
    seq: u64,
    batch_id: u64,
    page: PageRecord,
}

struct Done {
    seq: u64,
    batch_id: u64,
    page_id: u64,
    rows: Result<ArticleRows, String>,
}

/// Counters kept by the dump-reading thread.
#[derive(Default)]
struct ReadTally {
    seen: u64,
    kept: u64,
    resumed_pages: u64,
    resumed_batches: u64,
    skipped_namespace: u64,
    skipped_redirect: u64,
    skipped_no_text: u64,
    stats: DumpStats,
}

fn track_page(page: &PageRecord) -> Result<ArticleRows, String> {
    let tracked = track_revisions(page.page_id, &page.revisions).map_err(|e| e.to_string())?;
    let (current, deleted) = content_rows(&tracked.article);
    let mut revisions = Vec::with_capacity(tracked.events.len());
    let mut hashes = Vec::with_capacity(tracked.events.len());
    let by_id: BTreeMap<u64, _> = page.revisions.iter().map(|r| (r.rev_id, r)).collect();
    for ev in &tracked.events {
        let r = by_id[&ev.rev_id];
        revisions.push(RevisionRow {
            page_id: page.page_id,
            rev_id: r.rev_id,
            timestamp: r.timestamp,
            editor: r.editor.clone(),
        });
        let sha1 = match (&r.content_hash, &r.text) {
            (Some(h), _) => h.clone(),
            (None, Some(t)) => content_hash(t),
            (None, None) => unreachable!("tracked revisions have text"),
        };
        hashes.push(RevisionHashRow {
            page_id: page.page_id,
            rev_id: r.rev_id,
            sha1,
        });
    }
    revisions.sort_by_key(|r| r.rev_id);
    hashes.sort_by_key(|r| r.rev_id);
    Ok(ArticleRows {
        current,
        deleted,
        revisions,
        hashes,
        suppressed: tracked.skipped.len() as u64,
    })
}

fn worker(jobs: Receiver<Job>, results: Sender<Done>) {
    for job in jobs {
        let rows = track_page(&job.page);
        let done = Done {
            seq: job.seq,
            batch_id: job.batch_id,
            page_id: job.page.page_id,
            rows,
        };
        if results.send(done).is_err() {
            break;
        }
    }
}

fn read_dump(
    cfg: &ProcessConfig,
    jobs: Sender<Job>,
) -> anyhow::Result<ReadTally> {
    let mut reader = open_dump(&cfg.dump, Compression::Auto)
        .with_context(|| format!("opening dump {}", cfg.dump.display()))?;
    let mut t = ReadTally::default();
    let mut seq = 0u64;
    let mut prev_page: Option<u64> = None;
    let mut last_resumed_batch = None;
    while let Some(mut page) = reader
        .next_page()
        .with_context(|| format!("reading dump {}", cfg.dump.display()))?
    {
        t.seen += 1;
        if page.namespace != 0 {
            t.skipped_namespace += 1;
            continue;
        }
        page.sort_revisions();
        match page.latest().and_then(|r| r.text.as_deref()) {
            None => {
                t.skipped_no_text += 1;
                continue;
            }
            Some(text) if is_redirect(text) => {
                t.skipped_redirect += 1;
                continue;
            }
            Some(_) => {}
        }
        if prev_page.is_some_and(|p| p >= page.page_id) {
            bail!(
                "dump pages are not in ascending id order: page {} follows page {}",
                page.page_id,
                prev_page.unwrap_or_default()
            );
        }
        prev_page = Some(page.page_id);
        let batch_id = t.kept / cfg.batch_size as u64;
        t.kept += 1;
        if done_marker(&cfg.out, batch_id).is_file() {
            t.resumed_pages += 1;
            if last_resumed_batch != Some(batch_id) {
                last_resumed_batch = Some(batch_id);
                t.resumed_batches += 1;
            }
            continue;
        }
        let job = Job {
            seq,
            batch_id,
            page,
        };
        seq += 1;
        if jobs.send(job).is_err() {
            // the writer stopped; its error is reported instead
            break;
        }
        if t.seen % 1000 == 0 {
            tracing::info!(pages = t.seen, kept = t.kept, "reading dump");
        }
    }
    t.stats = reader.stats();
    Ok(t)
}

/// The four writers of the batch being assembled.
struct OpenBatch {
    batch_id: u64,
    first_page_id: u64,
    last_page_id: u64,
    current: BatchWriter<ContentRow>,
    deleted: BatchWriter<ContentRow>,
    revisions: BatchWriter<RevisionRow>,
    hashes: BatchWriter<RevisionHashRow>,
}

impl OpenBatch {
    fn create(cfg: &ProcessConfig, batch_id: u64, first_page_id: u64, last: u64) -> anyhow::Result<Self> {
        let desc = |t| BatchDescriptor {
            dump_date: cfg.dump_date.clone(),
            output_type: t,
            batch_id,
            first_page_id,
            last_page_id: last,
        };
        let open = |t| -> anyhow::Result<_> { Ok((dir_for(&cfg.out, t), desc(t))) };
        let (d, c) = open(OutputType::CurrentContent)?;
        let current = BatchWriter::create(&d, c, cfg.compress)?;
        let (d, c) = open(OutputType::DeletedContent)?;
        let deleted = BatchWriter::create(&d, c, cfg.compress)?;
        let (d, c) = open(OutputType::Revisions)?;
        let revisions = BatchWriter::create(&d, c, cfg.compress)?;
        let (d, c) = open(OutputType::RevisionHashes)?;
        let hashes = BatchWriter::create(&d, c, cfg.compress)?;
        Ok(OpenBatch {
            batch_id,
            first_page_id,
            last_page_id: first_page_id,
            current,
            deleted,
            revisions,
            hashes,
        })
    }

    fn write(&mut self, page_id: u64, rows: &ArticleRows) -> anyhow::Result<()> {
        self.last_page_id = page_id;
        for r in &rows.current {
            self.current.write_row(r)?;
        }
        for r in &rows.deleted {
            self.deleted.write_row(r)?;
        }
        for r in &rows.revisions {
            self.revisions.write_row(r)?;
        }
        for r in &rows.hashes {
            self.hashes.write_row(r)?;
        }
        Ok(())
    }

    fn finish(self, out: &Path) -> anyhow::Result<()> {
        let last = self.last_page_id;
        let paths: Vec<PathBuf> = vec![
            self.current.finish_with_last_page(last)?,
            self.deleted.finish_with_last_page(last)?,
            self.revisions.finish_with_last_page(last)?,
            self.hashes.finish_with_last_page(last)?,
        ];
        let names: Vec<String> = paths
            .iter()
            .filter_map(|p| p.strip_prefix(out).ok())
            .map(|p| p.display().to_string())
            .collect();
        write_atomic(&done_marker(out, self.batch_id), &(names.join("\n") + "\n"))?;
        tracing::info!(batch = self.batch_id, first = self.first_page_id, last, "batch finished");
        Ok(())
    }
}

fn write_atomic(path: &Path, contents: &str) -> anyhow::Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, contents).with_context(|| format!("writing {}", tmp.display()))?;
    fs::rename(&tmp, path).with_context(|| format!("renaming {}", tmp.display()))?;
    Ok(())
}

fn prepare_out_dir(cfg: &ProcessConfig) -> anyhow::Result<()> {
    for d in [cfg.out.clone(), cfg.out.join(AUX_DIR), cfg.out.join(PROGRESS_DIR)] {
        fs::create_dir_all(&d).with_context(|| format!("creating {}", d.display()))?;
    }
    let dump_bytes = fs::metadata(&cfg.dump)
        .with_context(|| format!("reading dump {}", cfg.dump.display()))?
        .len();
    let manifest = Manifest {
        dump_file: cfg
            .dump
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default(),
        dump_bytes,
        dump_date: cfg.dump_date.clone(),
        batch_size: cfg.batch_size,
        compress: cfg.compress,
    };
    let manifest_path = cfg.out.join(RUN_MANIFEST);
    if manifest_path.is_file() {
        let text = fs::read_to_string(&manifest_path)?;
        let old: Manifest = serde_json::from_str(&text)
            .with_context(|| format!("parsing {}", manifest_path.display()))?;
        if old != manifest {
            bail!(
                "{} holds a run with different settings ({old:?}); use an empty output directory",
                cfg.out.display()
            );
        }
        tracing::info!("resuming run in {}", cfg.out.display());
    } else {
        let has_batches = fs::read_dir(&cfg.out)?
            .filter_map(Result::ok)
            .any(|e| BatchDescriptor::parse_file_name(&e.file_name().to_string_lossy()).is_ok());
        if has_batches {
            bail!("{} already holds batch files from another run", cfg.out.display());
        }
        write_atomic(&manifest_path, &serde_json::to_string_pretty(&manifest)?)?;
    }
    let complete = cfg.out.join(COMPLETE_MARKER);
    if complete.exists() {
        fs::remove_file(&complete)?;
    }
    for dir in [cfg.out.clone(), cfg.out.join(AUX_DIR)] {
        for e in fs::read_dir(&dir)? {
            let p = e?.path();
            if p.extension().is_some_and(|x| x == "tmp") {
                fs::remove_file(&p)?;
            }
        }
    }
    Ok(())
}

/// Runs the whole pipeline and returns the report that was written.
pub fn process(cfg: &ProcessConfig) -> anyhow::Result<RunReport> {
    let started = Instant::now();
    prepare_out_dir(cfg)?;
    let (job_tx, job_rx) = bounded::<Job>(cfg.workers * 4);
    let (done_tx, done_rx) = bounded::<Done>(cfg.workers * 4);

    let mut report = RunReport {
        dump: cfg.dump.display().to_string(),
        dump_date: cfg.dump_date.clone(),
        batch_size: cfg.batch_size,
        workers: cfg.workers,
        compress: cfg.compress,
        ..Default::default()
    };

    let (tally, written) = thread::scope(|s| -> anyhow::Result<_> {
        let reader = s.spawn(move || read_dump(cfg, job_tx));
        for _ in 0..cfg.workers {
            let rx = job_rx.clone();
            let tx = done_tx.clone();
            s.spawn(move || worker(rx, tx));
        }
        drop(job_rx);
        drop(done_tx);
        let written = write_results(cfg, done_rx, &mut report);
        let tally = reader.join().expect("dump reader panicked");
        let (tally, open) = (tally?, written?);
        Ok((tally, open))
    })?;

    if let Some(open) = written {
        open.finish(&cfg.out)?;
    }
    if tally.kept == 0 && !done_marker(&cfg.out, 0).is_file() {
        // an empty dump still yields one header-only batch
        OpenBatch::create(cfg, 0, 0, 0)?.finish(&cfg.out)?;
    }
    report.pages_seen = tally.seen;
    report.pages_resumed = tally.resumed_pages;
    report.pages_skipped_namespace = tally.skipped_namespace;
    report.pages_skipped_redirect = tally.skipped_redirect;
    report.pages_skipped_no_text = tally.skipped_no_text;
    report.revisions_seen = tally.stats.revisions;
    report.sha1_mismatches = tally.stats.sha1_mismatches;
    report.batches = tally.kept.div_ceil(cfg.batch_size as u64).max(1);
    report.batches_resumed = tally.resumed_batches;
    report.wall_seconds = started.elapsed().as_secs_f64();

    write_atomic(
        &cfg.out.join(RUN_REPORT),
        &(serde_json::to_string_pretty(&report)? + "\n"),
    )?;
    fs::write(cfg.out.join(COMPLETE_MARKER), "")
        .with_context(|| format!("writing {} marker", COMPLETE_MARKER))?;
    Ok(report)
}

/// Writes results in dump order. Returns the batch still open at the end,
/// which the caller finishes only if the dump was read without error.
fn write_results(
    cfg: &ProcessConfig,
    results: Receiver<Done>,
    report: &mut RunReport,
) -> anyhow::Result<Option<OpenBatch>> {
    let mut pending: BTreeMap<u64, Done> = BTreeMap::new();
    let mut next = 0u64;
    let mut open: Option<OpenBatch> = None;
    for done in results {
        pending.insert(done.seq, done);
        while let Some(d) = pending.remove(&next) {
            next += 1;
            if open.as_ref().is_some_and(|b| b.batch_id != d.batch_id) {
                open.take().expect("open batch").finish(&cfg.out)?;
            }
            if open.is_none() {
                open = Some(OpenBatch::create(cfg, d.batch_id, d.page_id, u64::MAX)?);
            }
            let batch = open.as_mut().expect("open batch");
            match d.rows {
                Ok(rows) => {
                    batch.write(d.page_id, &rows)?;
                    report.pages_processed += 1;
                    report.revisions_tracked += rows.revisions.len() as u64;
                    report.revisions_suppressed += rows.suppressed;
                    report.tokens_created += (rows.current.len() + rows.deleted.len()) as u64;
                    report.tokens_current += rows.current.len() as u64;
                }
                Err(error) => {
                    tracing::warn!(page = d.page_id, %error, "page failed");
                    batch.last_page_id = d.page_id;
                    report.pages_failed += 1;
                    report.failures.push(PageFailure {
                        page_id: d.page_id,
                        error,
                    });
                }
            }
        }
    }
    Ok(open)
}
