use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::io::{self, BufRead};

use chrono::{DateTime, Datelike, Duration, Utc};

use crate::dump::EditorId;
use crate::tracker::TokenHistory;

use super::{lookup, AnalyticsError, RevisionTable};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EditorClass {
    Registered,
    Unregistered,
    Bot,
}

/// Known bot accounts, by user id and optionally by user name.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct BotList {
    ids: HashSet<u64>,
    names: HashSet<String>,
}

impl BotList {
    pub fn new(ids: impl IntoIterator<Item = u64>) -> Self {
        BotList {
            ids: ids.into_iter().collect(),
            names: HashSet::new(),
        }
    }

    /// Reads a newline-delimited list. Numeric lines are user ids, other
    /// non-empty lines are user names; `#` starts a comment line.
    pub fn from_reader(r: impl BufRead) -> io::Result<Self> {
        let mut list = BotList::default();
        for line in r.lines() {
            let line = line?;
            let entry = line.trim();
            if entry.is_empty() || entry.starts_with('#') {
                continue;
            }
            match entry.parse::<u64>() {
                Ok(id) => {
                    list.ids.insert(id);
                }
                Err(_) => {
                    list.names.insert(entry.to_owned());
                }
            }
        }
        Ok(list)
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty() && self.names.is_empty()
    }

    pub fn len(&self) -> usize {
        self.ids.len() + self.names.len()
    }
}

/// Classifies the editor of a revision. `username` is only consulted for
/// registered editors whose id is not listed.
pub fn classify_editor(editor: &EditorId, username: Option<&str>, bots: &BotList) -> EditorClass {
    match editor {
        EditorId::Unregistered(_) => EditorClass::Unregistered,
        EditorId::Registered(id) => {
            if bots.ids.contains(id) || username.is_some_and(|n| bots.names.contains(n)) {
                EditorClass::Bot
            } else {
                EditorClass::Registered
            }
        }
    }
}

/// A UTC calendar month.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct YearMonth {
    pub year: i32,
    pub month: u32,
}

impl YearMonth {
    pub fn of(ts: DateTime<Utc>) -> Self {
        YearMonth {
            year: ts.year(),
            month: ts.month(),
        }
    }
}

impl fmt::Display for YearMonth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04}-{:02}", self.year, self.month)
    }
}

/// Fate of the tokens added in one month.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SurvivalBucket {
    pub month: YearMonth,
    pub added: u64,
    pub died_within_horizon: u64,
    pub survived_horizon_not_to_end: u64,
    pub survived_to_end: u64,
    /// Horizon survivors added by registered, non-bot editors.
    pub survivors_registered: u64,
    pub survivors_unregistered: u64,
    pub survivors_bot: u64,
}

impl SurvivalBucket {
    fn empty(month: YearMonth) -> Self {
        SurvivalBucket {
            month,
            added: 0,
            died_within_horizon: 0,
            survived_horizon_not_to_end: 0,
            survived_to_end: 0,
            survivors_registered: 0,
            survivors_unregistered: 0,
            survivors_bot: 0,
        }
    }

    fn merge(&mut self, o: &SurvivalBucket) {
        self.added += o.added;
        self.died_within_horizon += o.died_within_horizon;
        self.survived_horizon_not_to_end += o.survived_horizon_not_to_end;
        self.survived_to_end += o.survived_to_end;
        self.survivors_registered += o.survivors_registered;
        self.survivors_unregistered += o.survivors_unregistered;
        self.survivors_bot += o.survivors_bot;
    }

    pub fn horizon_survivors(&self) -> u64 {
        self.survived_horizon_not_to_end + self.survived_to_end
    }
}

/// Mergeable monthly survival counts.
///
/// A token counts as dying within the horizon when its first deletion at
/// or before `end` happens less than `horizon` after its origin. Otherwise
/// it survived to the end when it is present at `end`, and survived only
/// the horizon when not.
#[derive(Clone, Debug)]
pub struct SurvivalAccumulator {
    end: DateTime<Utc>,
    horizon: Duration,
    buckets: BTreeMap<YearMonth, SurvivalBucket>,
}

impl SurvivalAccumulator {
    pub fn new(end: DateTime<Utc>, horizon: Duration) -> Self {
        SurvivalAccumulator {
            end,
            horizon,
            buckets: BTreeMap::new(),
        }
    }

    pub fn add(
        &mut self,
        h: &TokenHistory,
        revs: &RevisionTable,
        bots: &BotList,
    ) -> Result<(), AnalyticsError> {
        let origin = lookup(revs, h.origin_rev_id)?;
        if origin.timestamp > self.end {
            return Err(AnalyticsError::OriginAfterEnd {
                token_id: h.token_id,
                origin: origin.timestamp,
                end: self.end,
            });
        }
        let mut outs_by_end = 0usize;
        let mut first_out = None;
        for &o in &h.outs {
            let ts = lookup(revs, o)?.timestamp;
            if ts <= self.end {
                outs_by_end += 1;
                first_out.get_or_insert(ts);
            }
        }
        let mut ins_by_end = 0usize;
        for &i in &h.ins {
            if lookup(revs, i)?.timestamp <= self.end {
                ins_by_end += 1;
            }
        }
        let month = YearMonth::of(origin.timestamp);
        let b = self
            .buckets
            .entry(month)
            .or_insert_with(|| SurvivalBucket::empty(month));
        b.added += 1;
        if first_out.is_some_and(|t| t - origin.timestamp < self.horizon) {
            b.died_within_horizon += 1;
            return Ok(());
        }
        if outs_by_end == ins_by_end {
            b.survived_to_end += 1;
        } else {
            b.survived_horizon_not_to_end += 1;
        }
        match classify_editor(&origin.editor, origin.username.as_deref(), bots) {
            EditorClass::Registered => b.survivors_registered += 1,
            EditorClass::Unregistered => b.survivors_unregistered += 1,
            EditorClass::Bot => b.survivors_bot += 1,
        }
        Ok(())
    }

    pub fn merge(&mut self, other: SurvivalAccumulator) {
        for (m, b) in other.buckets {
            self.buckets
                .entry(m)
                .or_insert_with(|| SurvivalBucket::empty(m))
                .merge(&b);
        }
    }

    /// Buckets in month order.
    pub fn finish(self) -> Vec<SurvivalBucket> {
        self.buckets.into_values().collect()
    }
}

/// Monthly survival buckets for a set of token histories.
pub fn survival_stats<'a>(
    histories: impl IntoIterator<Item = &'a TokenHistory>,
    revs: &RevisionTable,
    end: DateTime<Utc>,
    horizon: Duration,
    bots: &BotList,
) -> Result<Vec<SurvivalBucket>, AnalyticsError> {
    let mut acc = SurvivalAccumulator::new(end, horizon);
    for h in histories {
        acc.add(h, revs, bots)?;
    }
    Ok(acc.finish())
}
