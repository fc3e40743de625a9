//! `validate`: recreate sampled revisions from the batch files and compare
//! them with the dump text.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt::Write as _;
use std::fs;

use anyhow::Context;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use toktrack::dump::{keep_page, open_dump, Compression};
use toktrack::tokenize::tokenize;
use toktrack::tracker::{multiset, TokenMultiset};
use toktrack::{reconstruct_revision, PageRecord};

use crate::config::ValidateConfig;
use crate::index::{load_batch, load_index, BatchSet, PageData, RUN_REPORT};

/// One disagreement between the dataset and the dump.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Mismatch {
    pub page_id: u64,
    /// `None` when the whole article is affected.
    pub rev_id: Option<u64>,
    /// Tokens in the dump text but not in the recreated revision.
    pub missing: Vec<(String, usize)>,
    /// Tokens in the recreated revision but not in the dump text.
    pub extra: Vec<(String, usize)>,
    pub note: Option<String>,
}

#[derive(Clone, Debug, Default)]
pub struct ValidationReport {
    pub pages_checked: u64,
    pub revisions_checked: u64,
    pub mismatches: Vec<Mismatch>,
}

impl ValidationReport {
    pub fn render(&self) -> String {
        let mut s = format!(
            "checked {} revisions in {} articles: {}",
            self.revisions_checked,
            self.pages_checked,
            if self.mismatches.is_empty() {
                "all match".to_owned()
            } else {
                format!("{} mismatches", self.mismatches.len())
            }
        );
        for m in &self.mismatches {
            let _ = write!(s, "\narticle {}", m.page_id);
            if let Some(r) = m.rev_id {
                let _ = write!(s, " revision {r}");
            }
            if let Some(n) = &m.note {
                let _ = write!(s, ": {n}");
            }
            for (label, list) in [("missing", &m.missing), ("extra", &m.extra)] {
                if !list.is_empty() {
                    let items: Vec<String> = list.iter().map(|(t, n)| format!("{t:?}x{n}")).collect();
                    let _ = write!(s, "\n  {label}: {}", items.join(" "));
                }
            }
        }
        s
    }
}

/// Deterministic per-revision sampling decision.
pub fn sampled(seed: u64, rev_id: u64, fraction: f64) -> bool {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(rev_id);
    rng.gen::<f64>() < fraction
}

fn diff(expected: &TokenMultiset, got: &TokenMultiset) -> (Vec<(String, usize)>, Vec<(String, usize)>) {
    let mut missing = Vec::new();
    let mut extra = Vec::new();
    let keys: BTreeSet<&String> = expected.keys().chain(got.keys()).collect();
    for k in keys {
        let e = expected.get(k).copied().unwrap_or(0);
        let g = got.get(k).copied().unwrap_or(0);
        if e > g {
            missing.push((k.clone(), e - g));
        } else if g > e {
            extra.push((k.clone(), g - e));
        }
    }
    (missing, extra)
}

fn whole_page(page_id: u64, note: String) -> Mismatch {
    Mismatch {
        page_id,
        rev_id: None,
        missing: Vec::new(),
        extra: Vec::new(),
        note: Some(note),
    }
}

fn check_page(
    cfg: &ValidateConfig,
    page: &PageRecord,
    data: &PageData,
    report: &mut ValidationReport,
) {
    report.pages_checked += 1;
    let order = data.revision_order();
    let known: HashSet<u64> = order.iter().copied().collect();
    for rev in &page.revisions {
        let Some(text) = rev.text.as_deref() else { continue };
        if !sampled(cfg.seed, rev.rev_id, cfg.sample) {
            continue;
        }
        report.revisions_checked += 1;
        if !known.contains(&rev.rev_id) {
            report.mismatches.push(Mismatch {
                page_id: page.page_id,
                rev_id: Some(rev.rev_id),
                missing: Vec::new(),
                extra: Vec::new(),
                note: Some("revision missing from the dataset".into()),
            });
            continue;
        }
        let expected = multiset(tokenize(text));
        match reconstruct_revision(&data.histories, &order, rev.rev_id) {
            Ok(got) if got == expected => {}
            Ok(got) => {
                let (missing, extra) = diff(&expected, &got);
                report.mismatches.push(Mismatch {
                    page_id: page.page_id,
                    rev_id: Some(rev.rev_id),
                    missing,
                    extra,
                    note: None,
                });
            }
            Err(e) => report.mismatches.push(Mismatch {
                page_id: page.page_id,
                rev_id: Some(rev.rev_id),
                missing: Vec::new(),
                extra: Vec::new(),
                note: Some(e.to_string()),
            }),
        }
    }
}

struct Loaded {
    pages: BTreeMap<u64, PageData>,
    seen: HashSet<u64>,
}

impl Loaded {
    fn close(self, report: &mut ValidationReport) {
        for &p in self.pages.keys() {
            if !self.seen.contains(&p) {
                report
                    .mismatches
                    .push(whole_page(p, "article in the dataset but not in the dump".into()));
            }
        }
    }
}

pub fn validate(cfg: &ValidateConfig) -> anyhow::Result<ValidationReport> {
    let sets: Vec<BatchSet> = load_index(&cfg.out)?;
    let run_report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(cfg.out.join(RUN_REPORT))?)?;
    let failed: HashSet<u64> = run_report["failures"]
        .as_array()
        .into_iter()
        .flatten()
        .filter_map(|f| f["page_id"].as_u64())
        .collect();

    let mut report = ValidationReport::default();
    let mut reader = open_dump(&cfg.dump, Compression::Auto)
        .with_context(|| format!("opening dump {}", cfg.dump.display()))?;
    let mut idx = 0usize;
    let mut loaded: Option<Loaded> = None;
    while let Some(mut page) = reader
        .next_page()
        .with_context(|| format!("reading dump {}", cfg.dump.display()))?
    {
        page.sort_revisions();
        if !keep_page(&page) {
            continue;
        }
        while idx < sets.len() && sets[idx].last_page_id < page.page_id {
            if let Some(l) = loaded.take() {
                l.close(&mut report);
            }
            idx += 1;
        }
        let in_range = idx < sets.len() && sets[idx].first_page_id <= page.page_id;
        if in_range && loaded.is_none() {
            loaded = Some(Loaded {
                pages: load_batch(&sets[idx])?,
                seen: HashSet::new(),
            });
        }
        let data = match loaded.as_mut() {
            Some(l) if in_range => {
                l.seen.insert(page.page_id);
                l.pages.get(&page.page_id)
            }
            _ => None,
        };
        match data {
            Some(d) => check_page(cfg, &page, d, &mut report),
            None if failed.contains(&page.page_id) => {}
            None => report.mismatches.push(whole_page(
                page.page_id,
                "article in the dump but not in the dataset".into(),
            )),
        }
    }
    let rest = match loaded.take() {
        Some(l) => {
            l.close(&mut report);
            idx + 1
        }
        None => idx,
    };
    for set in sets.iter().skip(rest) {
        let pages = load_batch(set)?;
        Loaded {
            pages,
            seen: HashSet::new(),
        }
        .close(&mut report);
    }
    Ok(report)
}
