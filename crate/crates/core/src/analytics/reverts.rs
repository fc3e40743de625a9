use std::collections::{BTreeMap, BTreeSet, HashMap};

use crate::tracker::TokenHistory;

use super::undo::UndoAction;
use super::AnalyticsError;

/// Number of equal-width ratio bins over `(0, 1]`.
pub const RATIO_BINS: usize = 100;

/// What a revision originally did.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct RevisionActions {
    pub adds: u64,
    pub dels: u64,
    pub res: u64,
}

impl RevisionActions {
    pub fn total(&self) -> u64 {
        self.adds + self.dels + self.res
    }
}

/// Action counts of every revision in `revision_ids`, recovered from the
/// article's token histories. Revisions without actions map to zero.
pub fn revision_actions<'a>(
    histories: impl IntoIterator<Item = &'a TokenHistory>,
    revision_ids: &[u64],
) -> HashMap<u64, RevisionActions> {
    let mut m: HashMap<u64, RevisionActions> = revision_ids
        .iter()
        .map(|&r| (r, RevisionActions::default()))
        .collect();
    for h in histories {
        m.entry(h.origin_rev_id).or_default().adds += 1;
        for &o in &h.outs {
            m.entry(o).or_default().dels += 1;
        }
        for &i in &h.ins {
            m.entry(i).or_default().res += 1;
        }
    }
    m
}

/// How much one revision undid of another.
#[derive(Clone, Debug, PartialEq)]
pub struct RevertClassification {
    pub reverting_rev_id: u64,
    pub reverted_rev_id: u64,
    pub undone_actions: u64,
    pub target_original_actions: u64,
    pub ratio: f64,
    pub full: bool,
    pub self_revert: bool,
}

/// Groups undo actions by `(acting, target)` revision pair.
///
/// A pair is a self revert when the acting and target editors coincide.
/// Output is sorted by reverting and then reverted revision id.
pub fn classify_reverts(
    actions: &[UndoAction],
    counts: &HashMap<u64, RevisionActions>,
) -> Result<Vec<RevertClassification>, AnalyticsError> {
    let mut pairs: BTreeMap<(u64, u64), (u64, bool)> = BTreeMap::new();
    for a in actions {
        let e = pairs
            .entry((a.acting_rev_id, a.target_rev_id))
            .or_insert((0, a.is_self_undo()));
        e.0 += 1;
    }
    pairs
        .into_iter()
        .map(|((acting, target), (undone, self_revert))| {
            let original = counts.get(&target).map_or(0, RevisionActions::total);
            if original == 0 || undone > original {
                return Err(AnalyticsError::NoOriginalActions(target));
            }
            Ok(RevertClassification {
                reverting_rev_id: acting,
                reverted_rev_id: target,
                undone_actions: undone,
                target_original_actions: original,
                ratio: undone as f64 / original as f64,
                full: undone == original,
                self_revert,
            })
        })
        .collect()
}

/// Unique reverting and reverted revisions of one revert type.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SummaryCell {
    pub reverting: u64,
    pub reverted: u64,
}

/// Corpus-level revert statistics. Summaries of disjoint revision sets
/// combine with [`RevertSummary::merge`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RevertSummary {
    pub revisions: u64,
    pub non_self_full: SummaryCell,
    pub non_self_partial: SummaryCell,
    pub self_full: SummaryCell,
    pub self_partial: SummaryCell,
    /// Revisions that neither deleted nor reinserted anything.
    pub purely_adding: u64,
    /// Revisions that undid some of their own editor's actions.
    pub self_correcting: u64,
    /// Revisions fully undoing at least one other editor's revision.
    pub full_reverting: u64,
    /// Revisions partially undoing at least one other editor's revision.
    pub partial_reverting: u64,
    /// Pair counts per ratio bin; bin `i` covers `(i/100, (i+1)/100]`.
    pub ratio_histogram: Vec<u64>,
    /// Reverting revisions by total undone actions; bin `k` covers
    /// `[2^k, 2^(k+1))`.
    pub absolute_histogram: Vec<u64>,
}

impl Default for RevertSummary {
    fn default() -> Self {
        RevertSummary {
            revisions: 0,
            non_self_full: SummaryCell::default(),
            non_self_partial: SummaryCell::default(),
            self_full: SummaryCell::default(),
            self_partial: SummaryCell::default(),
            purely_adding: 0,
            self_correcting: 0,
            full_reverting: 0,
            partial_reverting: 0,
            ratio_histogram: vec![0; RATIO_BINS],
            absolute_histogram: Vec::new(),
        }
    }
}

impl RevertSummary {
    fn frac(&self, n: u64) -> f64 {
        if self.revisions == 0 {
            0.0
        } else {
            n as f64 / self.revisions as f64
        }
    }

    pub fn purely_adding_fraction(&self) -> f64 {
        self.frac(self.purely_adding)
    }

    pub fn self_correcting_fraction(&self) -> f64 {
        self.frac(self.self_correcting)
    }

    pub fn full_reverting_fraction(&self) -> f64 {
        self.frac(self.full_reverting)
    }

    pub fn partial_reverting_fraction(&self) -> f64 {
        self.frac(self.partial_reverting)
    }

    /// Adds a summary over revisions disjoint from this one's.
    pub fn merge(&mut self, o: &RevertSummary) {
        fn add(a: &mut SummaryCell, b: &SummaryCell) {
            a.reverting += b.reverting;
            a.reverted += b.reverted;
        }
        self.revisions += o.revisions;
        add(&mut self.non_self_full, &o.non_self_full);
        add(&mut self.non_self_partial, &o.non_self_partial);
        add(&mut self.self_full, &o.self_full);
        add(&mut self.self_partial, &o.self_partial);
        self.purely_adding += o.purely_adding;
        self.self_correcting += o.self_correcting;
        self.full_reverting += o.full_reverting;
        self.partial_reverting += o.partial_reverting;
        for (a, b) in self.ratio_histogram.iter_mut().zip(&o.ratio_histogram) {
            *a += b;
        }
        if self.absolute_histogram.len() < o.absolute_histogram.len() {
            self.absolute_histogram.resize(o.absolute_histogram.len(), 0);
        }
        for (a, b) in self.absolute_histogram.iter_mut().zip(&o.absolute_histogram) {
            *a += b;
        }
    }
}

pub fn ratio_bin(ratio: f64) -> usize {
    ((ratio * RATIO_BINS as f64).ceil() as usize).clamp(1, RATIO_BINS) - 1
}

fn log2_bin(n: u64) -> usize {
    (63 - n.max(1).leading_zeros()) as usize
}

/// Summarizes classified reverts over the revisions in `counts`.
pub fn summarize_reverts(
    classes: &[RevertClassification],
    counts: &HashMap<u64, RevisionActions>,
) -> RevertSummary {
    let mut cells: [[BTreeSet<u64>; 2]; 4] = Default::default();
    let mut self_correcting = BTreeSet::new();
    let mut full_reverting = BTreeSet::new();
    let mut partial_reverting = BTreeSet::new();
    let mut s = RevertSummary::default();
    let mut undone_by: BTreeMap<u64, u64> = BTreeMap::new();
    for c in classes {
        let cell = match (c.self_revert, c.full) {
            (false, true) => 0,
            (false, false) => 1,
            (true, true) => 2,
            (true, false) => 3,
        };
        cells[cell][0].insert(c.reverting_rev_id);
        cells[cell][1].insert(c.reverted_rev_id);
        if c.self_revert {
            self_correcting.insert(c.reverting_rev_id);
        } else if c.full {
            full_reverting.insert(c.reverting_rev_id);
        } else {
            partial_reverting.insert(c.reverting_rev_id);
        }
        s.ratio_histogram[ratio_bin(c.ratio)] += 1;
        *undone_by.entry(c.reverting_rev_id).or_default() += c.undone_actions;
    }
    for &n in undone_by.values() {
        let b = log2_bin(n);
        if s.absolute_histogram.len() <= b {
            s.absolute_histogram.resize(b + 1, 0);
        }
        s.absolute_histogram[b] += 1;
    }
    let cell = |i: usize| SummaryCell {
        reverting: cells[i][0].len() as u64,
        reverted: cells[i][1].len() as u64,
    };
    s.revisions = counts.len() as u64;
    s.non_self_full = cell(0);
    s.non_self_partial = cell(1);
    s.self_full = cell(2);
    s.self_partial = cell(3);
    s.purely_adding = counts.values().filter(|a| a.dels == 0 && a.res == 0).count() as u64;
    s.self_correcting = self_correcting.len() as u64;
    s.full_reverting = full_reverting.len() as u64;
    s.partial_reverting = partial_reverting.len() as u64;
    s
}

/// Revert pairs implied by repeated content hashes.
///
/// `revisions` lists `(rev_id, content hash)` in article order. A revision
/// whose hash equals the most recent earlier revision with that hash reverts
/// every revision strictly in between. Returns `(reverting, reverted)` pairs.
pub fn identity_reverts<H: Eq + std::hash::Hash>(revisions: &[(u64, H)]) -> BTreeSet<(u64, u64)> {
    let mut last_seen: HashMap<&H, usize> = HashMap::new();
    let mut out = BTreeSet::new();
    for (i, (rev_id, h)) in revisions.iter().enumerate() {
        if let Some(&j) = last_seen.get(h) {
            for (between, _) in &revisions[j + 1..i] {
                out.insert((*rev_id, *between));
            }
        }
        last_seen.insert(h, i);
    }
    out
}

/// Overlap between identity-based revert pairs and token-based
/// classifications.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RevertComparison {
    pub identity_pairs: u64,
    pub identity_found_full: u64,
    pub identity_found_partial: u64,
    pub identity_not_found: u64,
    pub token_full_pairs: u64,
    pub token_full_in_identity: u64,
    pub token_full_not_in_identity: u64,
}

impl RevertComparison {
    pub fn merge(&mut self, o: &RevertComparison) {
        self.identity_pairs += o.identity_pairs;
        self.identity_found_full += o.identity_found_full;
        self.identity_found_partial += o.identity_found_partial;
        self.identity_not_found += o.identity_not_found;
        self.token_full_pairs += o.token_full_pairs;
        self.token_full_in_identity += o.token_full_in_identity;
        self.token_full_not_in_identity += o.token_full_not_in_identity;
    }

    fn pct(n: u64, d: u64) -> f64 {
        if d == 0 {
            0.0
        } else {
            100.0 * n as f64 / d as f64
        }
    }

    /// Percentage of identity pairs that are token-based full reverts.
    pub fn identity_full_pct(&self) -> f64 {
        Self::pct(self.identity_found_full, self.identity_pairs)
    }

    pub fn identity_partial_pct(&self) -> f64 {
        Self::pct(self.identity_found_partial, self.identity_pairs)
    }

    /// Percentage of token-based full pairs the identity method also finds.
    pub fn token_full_in_identity_pct(&self) -> f64 {
        Self::pct(self.token_full_in_identity, self.token_full_pairs)
    }
}

pub fn compare_revert_methods(
    token_based: &[RevertClassification],
    identity_based: &BTreeSet<(u64, u64)>,
) -> RevertComparison {
    let by_pair: HashMap<(u64, u64), bool> = token_based
        .iter()
        .map(|c| ((c.reverting_rev_id, c.reverted_rev_id), c.full))
        .collect();
    let mut r = RevertComparison {
        identity_pairs: identity_based.len() as u64,
        ..Default::default()
    };
    for p in identity_based {
        match by_pair.get(p) {
            Some(true) => r.identity_found_full += 1,
            Some(false) => r.identity_found_partial += 1,
            None => r.identity_not_found += 1,
        }
    }
    for c in token_based.iter().filter(|c| c.full) {
        r.token_full_pairs += 1;
        if identity_based.contains(&(c.reverting_rev_id, c.reverted_rev_id)) {
            r.token_full_in_identity += 1;
        } else {
            r.token_full_not_in_identity += 1;
        }
    }
    r
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytics::{extract_undo_actions, table_from_records};
    use crate::dump::{EditorId, RevisionRecord};
    use crate::fixtures::{toy_revisions, TOY_REV_IDS};
    use crate::tracker::track_revisions;
    use chrono::{Duration, TimeZone, Utc};

    fn classify(revs: &[RevisionRecord]) -> (Vec<RevertClassification>, HashMap<u64, RevisionActions>) {
        let page = revs[0].page_id;
        let t = track_revisions(page, revs).unwrap();
        let hist = t.article.all_histories();
        let counts = revision_actions(hist.iter().copied(), &t.article.revision_ids);
        let acts = extract_undo_actions(page, hist, &table_from_records(revs)).unwrap();
        (classify_reverts(&acts, &counts).unwrap(), counts)
    }

    fn history(texts: &[&str], editors: &[u64]) -> Vec<RevisionRecord> {
        let t0 = Utc.with_ymd_and_hms(2014, 2, 1, 0, 0, 0).unwrap();
        texts
            .iter()
            .zip(editors)
            .enumerate()
            .map(|(i, (t, &e))| {
                RevisionRecord::new(5, i as u64 + 1, t0 + Duration::minutes(i as i64), EditorId::Registered(e), *t)
            })
            .collect()
    }

    #[test]
    fn toy_partial_reverts() {
        let (cls, counts) = classify(&toy_revisions());
        let [r1, r2, r3, r4] = TOY_REV_IDS;
        assert_eq!(counts[&r1].total(), 6);
        assert_eq!(counts[&r3].total(), 6);
        let by_r4: Vec<&RevertClassification> =
            cls.iter().filter(|c| c.reverting_rev_id == r4).collect();
        assert_eq!(by_r4.len(), 2);
        for (c, target) in by_r4.iter().zip([r1, r3]) {
            assert_eq!(c.reverted_rev_id, target);
            assert_eq!((c.undone_actions, c.target_original_actions), (4, 6));
            assert!(!c.full && !c.self_revert);
            assert!((c.ratio - 4.0 / 6.0).abs() < 1e-12);
        }
        assert_eq!(by_r4.iter().map(|c| c.undone_actions).sum::<u64>(), 8);
        // R2 deletes bark and loudly, the 2 of R1's 6 additions
        let r2_on_r1 = cls.iter().find(|c| c.reverting_rev_id == r2).unwrap();
        assert_eq!((r2_on_r1.reverted_rev_id, r2_on_r1.undone_actions), (r1, 2));
    }

    #[test]
    fn undoing_the_predecessor_is_a_full_revert() {
        let (cls, counts) = classify(&history(&["a b c", "a b c d e", "a b c"], &[1, 2, 3]));
        assert_eq!(cls.len(), 1);
        assert_eq!((cls[0].reverting_rev_id, cls[0].reverted_rev_id), (3, 2));
        assert!(cls[0].full && !cls[0].self_revert);
        assert_eq!(cls[0].ratio, 1.0);
        let s = summarize_reverts(&cls, &counts);
        assert_eq!(s.non_self_full, SummaryCell { reverting: 1, reverted: 1 });
        assert_eq!(s.self_full, SummaryCell::default());
        assert_eq!(s.ratio_histogram[99], 1);
        assert_eq!(s.absolute_histogram, vec![0, 1]);
        assert!((s.purely_adding_fraction() - 2.0 / 3.0).abs() < 1e-12);
        assert!((s.full_reverting_fraction() - 1.0 / 3.0).abs() < 1e-12);
    }

    /// Ten revisions by three editors with a known revert structure.
    #[test]
    fn scripted_revert_structure() {
        let texts = [
            "intro text here.",                         // 1 A: adds 4
            "intro text here. more facts.",             // 2 B: adds 3
            "intro text here. more facts. spam!",       // 3 C: adds 2
            "intro text here. more facts.",             // 4 B: full revert of 3
            "intro text. more facts.",                  // 5 A: deletes "here" (1/4 of 1, self)
            "intro text here. more facts.",             // 6 C: re "here", full revert of 5
            "intro text here. more facts. extra.",      // 7 B: adds 2
            "intro text here. more facts. extra. x.",   // 8 B: adds 2
            "intro text here. more facts.",             // 9 B: self full of 7 and 8
            "intro text here.",                         // 10 A: deletes 2's 3 tokens
        ];
        let editors = [1, 2, 3, 2, 1, 3, 2, 2, 2, 1];
        let (cls, counts) = classify(&history(&texts, &editors));
        let got: Vec<(u64, u64, u64, u64, bool, bool)> = cls
            .iter()
            .map(|c| (c.reverting_rev_id, c.reverted_rev_id, c.undone_actions, c.target_original_actions, c.full, c.self_revert))
            .collect();
        assert_eq!(
            got,
            vec![
                (4, 3, 2, 2, true, false),
                (5, 1, 1, 4, false, true),
                (6, 5, 1, 1, true, false),
                (9, 7, 2, 2, true, true),
                (9, 8, 2, 2, true, true),
                (10, 2, 3, 3, true, false),
            ]
        );
        let s = summarize_reverts(&cls, &counts);
        assert_eq!(s.revisions, 10);
        assert_eq!(s.non_self_full, SummaryCell { reverting: 3, reverted: 3 });
        assert_eq!(s.self_full, SummaryCell { reverting: 1, reverted: 2 });
        assert_eq!(s.self_partial, SummaryCell { reverting: 1, reverted: 1 });
        assert_eq!(s.non_self_partial, SummaryCell::default());
        assert!((s.self_correcting_fraction() - 0.2).abs() < 1e-12);
        let identity: Vec<_> = texts.iter().enumerate().map(|(i, t)| (i as u64 + 1, *t)).collect();
        assert_eq!(
            identity_reverts(&identity),
            [(4, 3), (6, 5), (9, 7), (9, 8)]
                .into_iter()
                .chain((2..10).map(|r| (10, r)))
                .collect()
        );
    }

    #[test]
    fn summaries_merge_like_one_pass() {
        let a = history(&["a b c", "a b c d e", "a b c"], &[1, 2, 3]);
        let b: Vec<RevisionRecord> = history(&["x y", "x", "x y z"], &[4, 4, 5])
            .into_iter()
            .map(|mut r| {
                r.page_id = 6;
                r.rev_id += 10;
                r
            })
            .collect();
        let (ca, na) = classify(&a);
        let (cb, nb) = classify(&b);
        let mut merged = summarize_reverts(&ca, &na);
        merged.merge(&summarize_reverts(&cb, &nb));
        let all: Vec<RevertClassification> = ca.into_iter().chain(cb).collect();
        let counts: HashMap<u64, RevisionActions> = na.into_iter().chain(nb).collect();
        assert_eq!(merged, summarize_reverts(&all, &counts));
        assert_eq!(merged.self_partial.reverting + merged.self_full.reverting, 1);
    }

    #[test]
    fn identity_examples() {
        let set = |v: &[(u64, u64)]| v.iter().copied().collect::<BTreeSet<_>>();
        assert_eq!(identity_reverts(&[(1, 'A'), (2, 'B'), (3, 'A')]), set(&[(3, 2)]));
        assert_eq!(identity_reverts(&[(1, 'A'), (2, 'B'), (3, 'C')]), set(&[]));
        assert_eq!(
            identity_reverts(&[(1, 'A'), (2, 'B'), (3, 'C'), (4, 'A')]),
            set(&[(4, 2), (4, 3)])
        );
        assert_eq!(
            identity_reverts(&[(1, 'A'), (2, 'B'), (3, 'A'), (4, 'C'), (5, 'A')]),
            set(&[(3, 2), (5, 4)])
        );
        assert_eq!(identity_reverts(&[(1, 'A'), (2, 'A')]), set(&[]));
    }

    fn cls(reverting: u64, reverted: u64, full: bool) -> RevertClassification {
        RevertClassification {
            reverting_rev_id: reverting,
            reverted_rev_id: reverted,
            undone_actions: 1,
            target_original_actions: if full { 1 } else { 2 },
            ratio: if full { 1.0 } else { 0.5 },
            full,
            self_revert: false,
        }
    }

    #[test]
    fn comparison_extremes() {
        let token = vec![cls(3, 2, true), cls(5, 4, true)];
        let same: BTreeSet<(u64, u64)> = [(3, 2), (5, 4)].into_iter().collect();
        let r = compare_revert_methods(&token, &same);
        assert_eq!(r.identity_full_pct(), 100.0);
        assert_eq!(r.token_full_in_identity_pct(), 100.0);
        let other: BTreeSet<(u64, u64)> = [(9, 8)].into_iter().collect();
        let r = compare_revert_methods(&token, &other);
        assert_eq!(r.identity_full_pct(), 0.0);
        assert_eq!((r.identity_not_found, r.token_full_not_in_identity), (1, 2));
        let r = compare_revert_methods(&[cls(9, 8, false)], &other);
        assert_eq!(r.identity_found_partial, 1);
    }

    #[test]
    fn restore_with_addition_only_found_by_tokens() {
        let revs = history(
            &["base words here", "base words here junk stuff", "base words here new fact"],
            &[1, 2, 3],
        );
        let (cls, _) = classify(&revs);
        let full: BTreeSet<(u64, u64)> = cls
            .iter()
            .filter(|c| c.full)
            .map(|c| (c.reverting_rev_id, c.reverted_rev_id))
            .collect();
        assert_eq!(full, [(3, 2)].into_iter().collect());
        let hashes: Vec<(u64, String)> = revs
            .iter()
            .map(|r| (r.rev_id, r.content_hash.clone().unwrap()))
            .collect();
        assert!(identity_reverts(&hashes).is_empty());
    }

    #[test]
    fn ratio_bins() {
        assert_eq!(ratio_bin(1.0), 99);
        assert_eq!(ratio_bin(0.01), 0);
        assert_eq!(ratio_bin(0.011), 1);
        assert_eq!(ratio_bin(4.0 / 6.0), 66);
        assert_eq!(log2_bin(1), 0);
        assert_eq!(log2_bin(3), 1);
        assert_eq!(log2_bin(4), 2);
    }

    #[test]
    fn zero_action_target_is_an_error() {
        let mut a = UndoAction {
            kind: crate::analytics::UndoKind::Del,
            page_id: 1,
            token_id: 1,
            acting_rev_id: 2,
            acting_editor: EditorId::Registered(1),
            target_rev_id: 1,
            target_editor: EditorId::Registered(2),
            dt: 5,
        };
        let counts: HashMap<u64, RevisionActions> = [(1, RevisionActions::default())].into_iter().collect();
        assert_eq!(
            classify_reverts(std::slice::from_ref(&a), &counts),
            Err(AnalyticsError::NoOriginalActions(1))
        );
        a.target_rev_id = 7;
        assert!(classify_reverts(&[a], &counts).is_err());
    }
}
