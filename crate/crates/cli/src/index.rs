//! Layout of a `process` output directory and batch-at-a-time loading.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context};
use toktrack::dataset::{
    list_batches, read_rows, BatchDescriptor, ContentRow, OutputType, RevisionHashRow, RevisionRow,
};
use toktrack::TokenHistory;

/// Written last by `process`; its absence marks partial output.
pub const COMPLETE_MARKER: &str = "COMPLETE";
pub const RUN_REPORT: &str = "run_report.json";
pub const RUN_MANIFEST: &str = "run_manifest.json";
/// Subdirectory for the revision hash files, which are not part of the
/// published dataset layout.
pub const AUX_DIR: &str = "aux";
/// Subdirectory for per-batch completion markers.
pub const PROGRESS_DIR: &str = "progress";

pub fn done_marker(out: &Path, batch_id: u64) -> PathBuf {
    out.join(PROGRESS_DIR).join(format!("batch-{batch_id}.done"))
}

pub fn dir_for(out: &Path, t: OutputType) -> PathBuf {
    match t {
        OutputType::RevisionHashes => out.join(AUX_DIR),
        _ => out.to_owned(),
    }
}

/// The four files of one batch.
#[derive(Clone, Debug)]
pub struct BatchSet {
    pub batch_id: u64,
    pub first_page_id: u64,
    pub last_page_id: u64,
    pub dump_date: String,
    pub files: BTreeMap<OutputType, PathBuf>,
}

/// Lists the batches of a finished run, refusing partial or gapped output.
pub fn load_index(out: &Path) -> anyhow::Result<Vec<BatchSet>> {
    if !out.join(COMPLETE_MARKER).is_file() {
        bail!(
            "{} has no {COMPLETE_MARKER} marker; the run is partial or still in progress",
            out.display()
        );
    }
    let report: serde_json::Value = serde_json::from_str(
        &fs::read_to_string(out.join(RUN_REPORT))
            .with_context(|| format!("reading {}", out.join(RUN_REPORT).display()))?,
    )
    .context("parsing run report")?;
    let expected = report["batches"]
        .as_u64()
        .ok_or_else(|| anyhow!("run report lacks a batch count"))?;

    let mut by_id: BTreeMap<u64, BTreeMap<OutputType, (BatchDescriptor, PathBuf)>> = BTreeMap::new();
    for dir in [out.to_owned(), out.join(AUX_DIR)] {
        if !dir.is_dir() {
            continue;
        }
        for (d, p) in list_batches(&dir)? {
            if dir_for(out, d.output_type) != dir {
                continue;
            }
            let slot = by_id.entry(d.batch_id).or_default();
            if let Some((_, other)) = slot.get(&d.output_type) {
                bail!(
                    "integrity error: batch {} has two {} files: {} and {}",
                    d.batch_id,
                    d.output_type,
                    other.display(),
                    p.display()
                );
            }
            slot.insert(d.output_type, (d, p));
        }
    }

    let mut sets = Vec::new();
    for id in 0..expected {
        let Some(files) = by_id.remove(&id) else {
            bail!("integrity error: batch {id} of {expected} is missing from {}", out.display());
        };
        let mut first = None;
        for t in OutputType::ALL {
            let Some((d, p)) = files.get(&t) else {
                bail!("integrity error: batch {id} has no {t} file");
            };
            let range = (d.first_page_id, d.last_page_id, &d.dump_date);
            match first {
                None => first = Some(range),
                Some(r) if r != range => {
                    bail!("integrity error: {} disagrees with the other files of batch {id}", p.display())
                }
                _ => {}
            }
        }
        let (first_page_id, last_page_id, dump_date) = first.expect("four files");
        let dump_date = dump_date.clone();
        sets.push(BatchSet {
            batch_id: id,
            first_page_id,
            last_page_id,
            dump_date,
            files: files.into_iter().map(|(t, (_, p))| (t, p)).collect(),
        });
    }
    if let Some(extra) = by_id.keys().next() {
        bail!("integrity error: batch {extra} lies beyond the {expected} batches in the run report");
    }
    for w in sets.windows(2) {
        if w[1].first_page_id <= w[0].last_page_id {
            bail!(
                "integrity error: batches {} and {} overlap",
                w[0].batch_id,
                w[1].batch_id
            );
        }
    }
    Ok(sets)
}

/// Everything stored about one article.
#[derive(Clone, Debug, Default)]
pub struct PageData {
    /// All token histories in token id order.
    pub histories: Vec<TokenHistory>,
    /// Revision rows sorted by `(timestamp, rev_id)`, which is article order.
    pub revisions: Vec<RevisionRow>,
    pub hashes: HashMap<u64, String>,
}

impl PageData {
    pub fn revision_order(&self) -> Vec<u64> {
        self.revisions.iter().map(|r| r.rev_id).collect()
    }
}

/// Reads the four files of a batch and groups the rows by article.
pub fn load_batch(set: &BatchSet) -> anyhow::Result<BTreeMap<u64, PageData>> {
    let mut pages: BTreeMap<u64, PageData> = BTreeMap::new();
    for t in [OutputType::CurrentContent, OutputType::DeletedContent] {
        let path = &set.files[&t];
        let (_, rows) = read_rows::<ContentRow>(path)?;
        for r in rows {
            let present = r.is_present();
            if present != (t == OutputType::CurrentContent) {
                bail!(
                    "{}: token {} of page {} is filed under the wrong content type",
                    path.display(),
                    r.token_id,
                    r.page_id
                );
            }
            pages.entry(r.page_id).or_default().histories.push(r.to_history());
        }
    }
    let (_, revisions) = read_rows::<RevisionRow>(&set.files[&OutputType::Revisions])?;
    for r in revisions {
        pages.entry(r.page_id).or_default().revisions.push(r);
    }
    let (_, hashes) = read_rows::<RevisionHashRow>(&set.files[&OutputType::RevisionHashes])?;
    for r in hashes {
        pages.entry(r.page_id).or_default().hashes.insert(r.rev_id, r.sha1);
    }
    for p in pages.values_mut() {
        p.histories.sort_by_key(|h| h.token_id);
        p.revisions.sort_by_key(|r| (r.timestamp, r.rev_id));
    }
    Ok(pages)
}
