//! Measurements over tracked token histories.
//!
//! Everything here works per article on [`TokenHistory`] values plus a
//! [`RevisionTable`] with revision timestamps and editors. Aggregations are
//! exposed as mergeable accumulators so that articles can be processed in
//! any order and combined afterwards.

mod conflict;
mod reverts;
mod survival;
mod undo;

use std::collections::HashMap;

use chrono::{DateTime, Utc};

use crate::dataset::RevisionRow;
use crate::dump::{EditorId, RevisionRecord};
use crate::tracker::TokenHistory;

pub use conflict::{
    aggregate_conflict, token_conflict, undo_weight, ConflictAggregator, ConflictScore,
    RankKey, RankedEntry, Scope,
};
pub use reverts::{
    classify_reverts, compare_revert_methods, identity_reverts, revision_actions,
    summarize_reverts, RevertClassification, RevertComparison, RevertSummary, RevisionActions,
    SummaryCell, RATIO_BINS,
};
pub use survival::{
    classify_editor, survival_stats, BotList, EditorClass, SurvivalAccumulator, SurvivalBucket,
    YearMonth,
};
pub use undo::{extract_undo_actions, token_undo_actions, UndoAction, UndoKind};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AnalyticsError {
    #[error("revision {0} is referenced by a token but missing from the revision table")]
    DanglingRevision(u64),
    #[error("token {token_id} originates at {origin} after the dataset end {end}")]
    OriginAfterEnd {
        token_id: u64,
        origin: DateTime<Utc>,
        end: DateTime<Utc>,
    },
    #[error("revision {0} is undone but has no recorded actions")]
    NoOriginalActions(u64),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

/// Metadata of one revision.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RevisionInfo {
    pub timestamp: DateTime<Utc>,
    pub editor: EditorId,
    pub username: Option<String>,
}

/// Revision metadata by revision id.
pub type RevisionTable = HashMap<u64, RevisionInfo>;

pub fn table_from_records<'a>(revs: impl IntoIterator<Item = &'a RevisionRecord>) -> RevisionTable {
    revs.into_iter()
        .map(|r| {
            (
                r.rev_id,
                RevisionInfo {
                    timestamp: r.timestamp,
                    editor: r.editor.clone(),
                    username: r.username.clone(),
                },
            )
        })
        .collect()
}

pub fn table_from_rows<'a>(rows: impl IntoIterator<Item = &'a RevisionRow>) -> RevisionTable {
    rows.into_iter()
        .map(|r| {
            (
                r.rev_id,
                RevisionInfo {
                    timestamp: r.timestamp,
                    editor: r.editor.clone(),
                    username: None,
                },
            )
        })
        .collect()
}

fn lookup(revs: &RevisionTable, rev_id: u64) -> Result<&RevisionInfo, AnalyticsError> {
    revs.get(&rev_id).ok_or(AnalyticsError::DanglingRevision(rev_id))
}

/// The revisions of a token's life in order: origin, then alternating outs
/// and ins.
fn events(h: &TokenHistory) -> impl Iterator<Item = u64> + '_ {
    std::iter::once(h.origin_rev_id).chain(
        h.outs
            .iter()
            .enumerate()
            .flat_map(|(i, &o)| std::iter::once(o).chain(h.ins.get(i).copied())),
    )
}
