//! `analyze`: survival, conflict and revert tables from the batch files.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use anyhow::{bail, Context};
use chrono::{DateTime, NaiveDate, Utc};
use toktrack::analytics::{
    classify_reverts, compare_revert_methods, extract_undo_actions, identity_reverts,
    revision_actions, summarize_reverts, table_from_rows, token_conflict, ConflictAggregator,
    RevertComparison, RevertSummary, RevisionTable, Scope, SurvivalAccumulator, RATIO_BINS,
};

use crate::config::AnalyzeConfig;
use crate::index::{load_batch, load_index, BatchSet, PageData};
use crate::Analysis;

fn default_end(sets: &[BatchSet]) -> anyhow::Result<DateTime<Utc>> {
    let date = sets.first().map(|s| s.dump_date.as_str()).unwrap_or("");
    match NaiveDate::parse_from_str(date, "%Y%m%d") {
        Ok(d) => Ok(d.and_hms_opt(0, 0, 0).expect("midnight").and_utc()),
        Err(_) => bail!("dump date {date:?} is not YYYYMMDD; pass --end"),
    }
}

fn csv_writer(path: &Path) -> anyhow::Result<csv::Writer<fs::File>> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)
        .with_context(|| format!("creating {}", path.display()))
}

/// Runs the configured analysis and returns a printable summary.
pub fn analyze(cfg: &AnalyzeConfig) -> anyhow::Result<String> {
    let sets = load_index(&cfg.out)?;
    fs::create_dir_all(&cfg.results)
        .with_context(|| format!("creating {}", cfg.results.display()))?;
    let summary = match cfg.analysis {
        Analysis::Survival => {
            let end = match cfg.end {
                Some(e) => e,
                None => default_end(&sets)?,
            };
            survival(cfg, &sets, end)?
        }
        Analysis::Conflict => conflict(cfg, &sets)?,
        Analysis::Reverts => reverts(cfg, &sets)?,
    };
    let name = match cfg.analysis {
        Analysis::Survival => "survival_summary.txt",
        Analysis::Conflict => "conflict_summary.txt",
        Analysis::Reverts => "revert_summary.txt",
    };
    fs::write(cfg.results.join(name), format!("{summary}\n"))?;
    Ok(summary)
}

fn for_each_page(
    sets: &[BatchSet],
    mut f: impl FnMut(u64, &PageData, &RevisionTable) -> anyhow::Result<()>,
) -> anyhow::Result<()> {
    for set in sets {
        for (&page_id, data) in &load_batch(set)? {
            let table = table_from_rows(&data.revisions);
            f(page_id, data, &table).with_context(|| format!("article {page_id}"))?;
        }
    }
    Ok(())
}

fn survival(cfg: &AnalyzeConfig, sets: &[BatchSet], end: DateTime<Utc>) -> anyhow::Result<String> {
    let mut acc = SurvivalAccumulator::new(end, cfg.horizon);
    let mut after_end = 0u64;
    for_each_page(sets, |_, data, table| {
        for h in &data.histories {
            if table.get(&h.origin_rev_id).is_some_and(|r| r.timestamp > end) {
                after_end += 1;
                continue;
            }
            acc.add(h, table, &cfg.bots)?;
        }
        Ok(())
    })?;
    let buckets = acc.finish();
    let path = cfg.results.join("survival_monthly.csv");
    let mut w = csv_writer(&path)?;
    w.write_record([
        "month",
        "added",
        "died_within_horizon",
        "survived_horizon_not_to_end",
        "survived_to_end",
        "survivors_registered",
        "survivors_unregistered",
        "survivors_bot",
        "horizon_survival_share",
    ])?;
    let (mut added, mut survivors) = (0u64, 0u64);
    for b in &buckets {
        added += b.added;
        survivors += b.horizon_survivors();
        let share = if b.added == 0 {
            0.0
        } else {
            b.horizon_survivors() as f64 / b.added as f64
        };
        w.write_record([
            b.month.to_string(),
            b.added.to_string(),
            b.died_within_horizon.to_string(),
            b.survived_horizon_not_to_end.to_string(),
            b.survived_to_end.to_string(),
            b.survivors_registered.to_string(),
            b.survivors_unregistered.to_string(),
            b.survivors_bot.to_string(),
            format!("{share:.6}"),
        ])?;
    }
    w.flush()?;
    Ok(format!(
        "survival up to {} with a {} h horizon: {} tokens added over {} months, {} survived the horizon; {} tokens after the end ignored\nwrote {}",
        end.format("%Y-%m-%dT%H:%M:%SZ"),
        cfg.horizon.num_hours(),
        added,
        buckets.len(),
        survivors,
        after_end,
        path.display()
    ))
}

fn conflict(cfg: &AnalyzeConfig, sets: &[BatchSet]) -> anyhow::Result<String> {
    let mut agg = ConflictAggregator::new(cfg.scope);
    let mut scored = 0u64;
    for_each_page(sets, |page_id, data, table| {
        for h in &data.histories {
            if !cfg.all_tokens && !h.is_present() {
                continue;
            }
            agg.add(page_id, &h.str, token_conflict(h, table)?);
            scored += 1;
        }
        Ok(())
    })?;
    let ranked = agg.finish(cfg.min_n, cfg.rank)?;
    let scope = match cfg.scope {
        Scope::Article => "article",
        Scope::StringGlobal => "string_global",
        Scope::StringInArticle => "string_in_article",
    };
    let path = cfg.results.join(format!("conflict_{scope}.csv"));
    let mut w = csv_writer(&path)?;
    w.write_record(["rank", "page_id", "str", "n", "sum_cb", "sum_ct", "cb_norm", "ct_norm"])?;
    for (i, e) in ranked.iter().enumerate() {
        w.write_record([
            (i + 1).to_string(),
            e.page_id.map(|p| p.to_string()).unwrap_or_default(),
            e.str.clone().unwrap_or_default(),
            e.n.to_string(),
            e.sum_cb.to_string(),
            format!("{:.6}", e.sum_ct),
            format!("{:.6}", e.cb_norm),
            format!("{:.6}", e.ct_norm),
        ])?;
    }
    w.flush()?;
    let mut s = format!(
        "conflict ({scope} scope, {} tokens scored): {} ranked entries\nwrote {}",
        scored,
        ranked.len(),
        path.display()
    );
    for (i, e) in ranked.iter().take(10).enumerate() {
        let label = match (e.page_id, &e.str) {
            (Some(p), Some(t)) => format!("article {p} {t:?}"),
            (Some(p), None) => format!("article {p}"),
            (None, Some(t)) => format!("{t:?}"),
            (None, None) => String::new(),
        };
        let _ = write!(
            s,
            "\n{:>3}. {label}: n={} cB={} cT={:.3}",
            i + 1,
            e.n,
            e.sum_cb,
            e.sum_ct
        );
    }
    Ok(s)
}

fn reverts(cfg: &AnalyzeConfig, sets: &[BatchSet]) -> anyhow::Result<String> {
    let mut summary = RevertSummary::default();
    let mut comparison = RevertComparison::default();
    let pairs_path = cfg.results.join("revert_pairs.csv");
    let mut pairs = csv_writer(&pairs_path)?;
    pairs.write_record([
        "page_id",
        "reverting_rev_id",
        "reverted_rev_id",
        "undone_actions",
        "target_original_actions",
        "ratio",
        "full",
        "self_revert",
        "identity_revert",
    ])?;
    for_each_page(sets, |page_id, data, table| {
        let order = data.revision_order();
        let counts = revision_actions(&data.histories, &order);
        let actions = extract_undo_actions(page_id, &data.histories, table)?;
        let classes = classify_reverts(&actions, &counts)?;
        let mut hashes = Vec::with_capacity(order.len());
        for r in &order {
            match data.hashes.get(r) {
                Some(h) => hashes.push((*r, h.as_str())),
                None => bail!("revision {r} has no content hash"),
            }
        }
        let identity = identity_reverts(&hashes);
        for c in &classes {
            pairs.write_record([
                page_id.to_string(),
                c.reverting_rev_id.to_string(),
                c.reverted_rev_id.to_string(),
                c.undone_actions.to_string(),
                c.target_original_actions.to_string(),
                format!("{:.6}", c.ratio),
                c.full.to_string(),
                c.self_revert.to_string(),
                identity.contains(&(c.reverting_rev_id, c.reverted_rev_id)).to_string(),
            ])?;
        }
        summary.merge(&summarize_reverts(&classes, &counts));
        comparison.merge(&compare_revert_methods(&classes, &identity));
        Ok(())
    })?;
    pairs.flush()?;

    let mut w = csv_writer(&cfg.results.join("revert_summary.csv"))?;
    w.write_record(["metric", "count", "fraction_of_revisions"])?;
    let frac = |n: u64| {
        if summary.revisions == 0 {
            0.0
        } else {
            n as f64 / summary.revisions as f64
        }
    };
    let rows: [(&str, u64); 5] = [
        ("revisions", summary.revisions),
        ("purely_adding", summary.purely_adding),
        ("self_correcting", summary.self_correcting),
        ("full_reverting", summary.full_reverting),
        ("partial_reverting", summary.partial_reverting),
    ];
    for (name, n) in rows {
        w.write_record([name.to_owned(), n.to_string(), format!("{:.6}", frac(n))])?;
    }
    let cells = [
        ("non_self_full", summary.non_self_full),
        ("non_self_partial", summary.non_self_partial),
        ("self_full", summary.self_full),
        ("self_partial", summary.self_partial),
    ];
    for (name, c) in cells {
        for (side, n) in [("reverting", c.reverting), ("reverted", c.reverted)] {
            w.write_record([format!("{name}_{side}"), n.to_string(), format!("{:.6}", frac(n))])?;
        }
    }
    w.flush()?;

    let mut w = csv_writer(&cfg.results.join("revert_ratio_histogram.csv"))?;
    w.write_record(["ratio_above", "ratio_up_to", "pairs"])?;
    for (i, n) in summary.ratio_histogram.iter().enumerate() {
        let lo = i as f64 / RATIO_BINS as f64;
        let hi = (i + 1) as f64 / RATIO_BINS as f64;
        w.write_record([format!("{lo:.2}"), format!("{hi:.2}"), n.to_string()])?;
    }
    w.flush()?;

    let mut w = csv_writer(&cfg.results.join("revert_absolute_histogram.csv"))?;
    w.write_record(["min_undone_actions", "max_undone_actions", "reverting_revisions"])?;
    for (i, n) in summary.absolute_histogram.iter().enumerate() {
        let lo = 1u64 << i;
        let hi = (1u64 << (i + 1)) - 1;
        w.write_record([lo.to_string(), hi.to_string(), n.to_string()])?;
    }
    w.flush()?;

    let mut w = csv_writer(&cfg.results.join("revert_method_comparison.csv"))?;
    w.write_record(["metric", "count", "percent"])?;
    let c = &comparison;
    let rows = [
        ("identity_pairs", c.identity_pairs, 100.0),
        ("identity_found_full", c.identity_found_full, c.identity_full_pct()),
        ("identity_found_partial", c.identity_found_partial, c.identity_partial_pct()),
        (
            "identity_not_found",
            c.identity_not_found,
            100.0 - c.identity_full_pct() - c.identity_partial_pct(),
        ),
        ("token_full_pairs", c.token_full_pairs, 100.0),
        ("token_full_in_identity", c.token_full_in_identity, c.token_full_in_identity_pct()),
        (
            "token_full_not_in_identity",
            c.token_full_not_in_identity,
            100.0 - c.token_full_in_identity_pct(),
        ),
    ];
    for (name, n, pct) in rows {
        let pct = if n == 0 { 0.0 } else { pct };
        w.write_record([name.to_owned(), n.to_string(), format!("{pct:.2}")])?;
    }
    w.flush()?;

    let s = &summary;
    Ok(format!(
        "reverts over {} revisions\n\
         full non-self: {} reverting / {} reverted\n\
         partial non-self: {} reverting / {} reverted\n\
         full self: {} reverting / {} reverted\n\
         partial self: {} reverting / {} reverted\n\
         purely adding {:.1}%, self-correcting {:.1}%, full reverting {:.1}%, partial reverting {:.1}%\n\
         identity pairs: {} ({:.1}% full, {:.1}% partial by tokens); token full pairs: {} ({:.1}% found by identity)\n\
         wrote tables to {}",
        s.revisions,
        s.non_self_full.reverting,
        s.non_self_full.reverted,
        s.non_self_partial.reverting,
        s.non_self_partial.reverted,
        s.self_full.reverting,
        s.self_full.reverted,
        s.self_partial.reverting,
        s.self_partial.reverted,
        100.0 * s.purely_adding_fraction(),
        100.0 * s.self_correcting_fraction(),
        100.0 * s.full_reverting_fraction(),
        100.0 * s.partial_reverting_fraction(),
        c.identity_pairs,
        c.identity_full_pct(),
        c.identity_partial_pct(),
        c.token_full_pairs,
        c.token_full_in_identity_pct(),
        cfg.results.display()
    ))
}
