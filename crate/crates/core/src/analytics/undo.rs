use crate::dump::EditorId;
use crate::tracker::TokenHistory;

use super::{events, lookup, AnalyticsError, RevisionTable};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum UndoKind {
    /// A deletion undoing the token's addition or last reinsertion.
    Del,
    /// A reinsertion undoing the token's last deletion.
    Re,
}

/// One deletion or reinsertion, read as undoing the previous event on the
/// same token.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct UndoAction {
    pub kind: UndoKind,
    pub page_id: u64,
    pub token_id: u64,
    pub acting_rev_id: u64,
    pub acting_editor: EditorId,
    pub target_rev_id: u64,
    pub target_editor: EditorId,
    /// Seconds since the previous event on the token.
    pub dt: i64,
}

impl UndoAction {
    pub fn is_self_undo(&self) -> bool {
        self.acting_editor == self.target_editor
    }
}

/// Undo actions of one token, in history order.
pub fn token_undo_actions(
    page_id: u64,
    h: &TokenHistory,
    revs: &RevisionTable,
) -> Result<Vec<UndoAction>, AnalyticsError> {
    let mut out = Vec::with_capacity(h.outs.len() + h.ins.len());
    let mut seq = events(h);
    let mut prev_id = seq.next().expect("origin always present");
    let mut prev = lookup(revs, prev_id)?;
    for (i, rev_id) in seq.enumerate() {
        let cur = lookup(revs, rev_id)?;
        out.push(UndoAction {
            kind: if i % 2 == 0 { UndoKind::Del } else { UndoKind::Re },
            page_id,
            token_id: h.token_id,
            acting_rev_id: rev_id,
            acting_editor: cur.editor.clone(),
            target_rev_id: prev_id,
            target_editor: prev.editor.clone(),
            dt: (cur.timestamp - prev.timestamp).num_seconds().max(0),
        });
        prev_id = rev_id;
        prev = cur;
    }
    Ok(out)
}

/// Undo actions of every token of one article.
pub fn extract_undo_actions<'a>(
    page_id: u64,
    histories: impl IntoIterator<Item = &'a TokenHistory>,
    revs: &RevisionTable,
) -> Result<Vec<UndoAction>, AnalyticsError> {
    let mut out = Vec::new();
    for h in histories {
        out.extend(token_undo_actions(page_id, h, revs)?);
    }
    Ok(out)
}
