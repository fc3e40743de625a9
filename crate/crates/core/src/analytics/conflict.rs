use std::cmp::Ordering;
use std::collections::HashMap;

use crate::tracker::TokenHistory;

use super::undo::token_undo_actions;
use super::{AnalyticsError, RevisionTable};

/// Per-token conflict: the number of counted undo actions and their
/// time-weighted sum.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ConflictScore {
    pub cb: u64,
    pub ct: f64,
}

/// Weight of one undo action that happened `dt` seconds after the previous
/// event on the token: `1 / log_3600(max(dt, 2))`.
pub fn undo_weight(dt: i64) -> f64 {
    let t = dt.max(2) as f64;
    3600f64.ln() / t.ln()
}

/// Conflict score of one token.
///
/// The first deletion is never counted, and neither is any action whose
/// editor is also the editor of the action it undoes.
pub fn token_conflict(
    h: &TokenHistory,
    revs: &RevisionTable,
) -> Result<ConflictScore, AnalyticsError> {
    let mut score = ConflictScore::default();
    for a in token_undo_actions(0, h, revs)?.into_iter().skip(1) {
        if !a.is_self_undo() {
            score.cb += 1;
            score.ct += undo_weight(a.dt);
        }
    }
    Ok(score)
}

/// How token scores are grouped.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Scope {
    /// Sums per article.
    Article,
    /// Sums per token string over all articles, divided by the string's
    /// frequency.
    StringGlobal,
    /// Sums per token string within each article, divided by the string's
    /// frequency in that article.
    StringInArticle,
}

/// Which sum orders a ranking.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum RankKey {
    Cb,
    Ct,
}

/// One line of a conflict ranking.
#[derive(Clone, Debug, PartialEq)]
pub struct RankedEntry {
    /// Set for article and in-article scopes.
    pub page_id: Option<u64>,
    /// Set for the string scopes.
    pub str: Option<String>,
    /// Number of tokens in the group.
    pub n: u64,
    pub sum_cb: u64,
    pub sum_ct: f64,
    /// `sum_cb / n` for string scopes, `sum_cb` for articles.
    pub cb_norm: f64,
    /// `sum_ct / n` for string scopes, `sum_ct` for articles.
    pub ct_norm: f64,
}

#[derive(Clone, Copy, Debug, Default)]
struct Sums {
    n: u64,
    cb: u64,
    ct: f64,
}

impl Sums {
    fn add(&mut self, n: u64, cb: u64, ct: f64) {
        self.n += n;
        self.cb += cb;
        self.ct += ct;
    }
}

/// Mergeable partial sums for one [`Scope`].
#[derive(Clone, Debug)]
pub struct ConflictAggregator {
    scope: Scope,
    groups: HashMap<(u64, String), Sums>,
}

impl ConflictAggregator {
    pub fn new(scope: Scope) -> Self {
        ConflictAggregator {
            scope,
            groups: HashMap::new(),
        }
    }

    pub fn scope(&self) -> Scope {
        self.scope
    }

    fn key(&self, page_id: u64, s: &str) -> (u64, String) {
        match self.scope {
            Scope::Article => (page_id, String::new()),
            Scope::StringGlobal => (0, s.to_owned()),
            Scope::StringInArticle => (page_id, s.to_owned()),
        }
    }

    pub fn add(&mut self, page_id: u64, s: &str, score: ConflictScore) {
        let key = self.key(page_id, s);
        self.groups.entry(key).or_default().add(1, score.cb, score.ct);
    }

    pub fn merge(&mut self, other: ConflictAggregator) {
        assert_eq!(self.scope, other.scope, "merging aggregators of different scopes");
        for (k, v) in other.groups {
            self.groups.entry(k).or_default().add(v.n, v.cb, v.ct);
        }
    }

    /// Ranks the groups, highest first. Groups with fewer than `min_n`
    /// tokens are dropped for [`Scope::StringGlobal`].
    pub fn finish(self, min_n: u64, key: RankKey) -> Result<Vec<RankedEntry>, AnalyticsError> {
        if min_n < 1 {
            return Err(AnalyticsError::InvalidParameter("min_n must be at least 1".into()));
        }
        let scope = self.scope;
        let mut out: Vec<RankedEntry> = self
            .groups
            .into_iter()
            .filter(|(_, v)| scope != Scope::StringGlobal || v.n >= min_n)
            .map(|((page_id, s), v)| {
                let div = if scope == Scope::Article { 1.0 } else { v.n as f64 };
                RankedEntry {
                    page_id: (scope != Scope::StringGlobal).then_some(page_id),
                    str: (scope != Scope::Article).then_some(s),
                    n: v.n,
                    sum_cb: v.cb,
                    sum_ct: v.ct,
                    cb_norm: v.cb as f64 / div,
                    ct_norm: v.ct / div,
                }
            })
            .collect();
        let primary = |e: &RankedEntry| match key {
            RankKey::Cb => e.cb_norm,
            RankKey::Ct => e.ct_norm,
        };
        out.sort_by(|a, b| {
            primary(b)
                .partial_cmp(&primary(a))
                .unwrap_or(Ordering::Equal)
                .then_with(|| b.sum_cb.cmp(&a.sum_cb))
                .then_with(|| a.page_id.cmp(&b.page_id))
                .then_with(|| a.str.cmp(&b.str))
        });
        Ok(out)
    }
}

/// Ranks `(page_id, token string, score)` triples under `scope`.
pub fn aggregate_conflict<'a>(
    scores: impl IntoIterator<Item = (u64, &'a str, ConflictScore)>,
    scope: Scope,
    min_n: u64,
    key: RankKey,
) -> Result<Vec<RankedEntry>, AnalyticsError> {
    let mut agg = ConflictAggregator::new(scope);
    for (page_id, s, score) in scores {
        agg.add(page_id, s, score);
    }
    agg.finish(min_n, key)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytics::table_from_records;
    use crate::fixtures::{toy_revisions, toy_revisions_with_editors, TOY_PAGE_ID};
    use crate::tracker::track_revisions;
    use proptest::prelude::*;

    fn t5(editors: [u64; 4]) -> ConflictScore {
        let revs = toy_revisions_with_editors(editors);
        let t = track_revisions(TOY_PAGE_ID, &revs).unwrap();
        let h = t.article.all_histories()[4].clone();
        assert_eq!(h.str, "bark");
        token_conflict(&h, &table_from_records(&revs)).unwrap()
    }

    #[test]
    fn bark_scores() {
        let distinct = t5([101, 102, 103, 104]);
        assert_eq!(distinct.cb, 2);
        let shared = t5([101, 102, 103, 103]);
        assert_eq!(shared.cb, 1);
        let expected = 3600f64.ln() / 20f64.ln();
        assert!((shared.ct - expected).abs() < 1e-12);
        assert!((shared.ct - 2.73).abs() < 0.01);
        assert!((distinct.ct - (expected + 1.0)).abs() < 1e-12);
    }

    #[test]
    fn weight_boundaries() {
        assert_eq!(undo_weight(3600), 1.0);
        assert!(undo_weight(3599) > 1.0);
        assert!(undo_weight(3601) < 1.0);
        assert_eq!(undo_weight(0), undo_weight(2));
        assert!(undo_weight(1).is_finite());
    }

    #[test]
    fn toy_article_ranking() {
        let revs = toy_revisions();
        let table = table_from_records(&revs);
        let t = track_revisions(TOY_PAGE_ID, &revs).unwrap();
        let scores: Vec<(u64, String, ConflictScore)> = t
            .article
            .all_histories()
            .into_iter()
            .map(|h| (TOY_PAGE_ID, h.str.clone(), token_conflict(h, &table).unwrap()))
            .collect();
        // cB per token: bark 2 (Re, Del), they 1 (Re), were 1 (Re); all else 0
        let ranked = aggregate_conflict(
            scores.iter().map(|(p, s, c)| (*p, s.as_str(), *c)),
            Scope::Article,
            1,
            RankKey::Cb,
        )
        .unwrap();
        assert_eq!(ranked.len(), 1);
        assert_eq!((ranked[0].page_id, ranked[0].n, ranked[0].sum_cb), (Some(TOY_PAGE_ID), 13, 4));
    }

    #[test]
    fn zero_article_ranks_last_and_min_n() {
        let z = ConflictScore::default();
        let c = |cb, ct| ConflictScore { cb, ct };
        let scores = vec![
            (1, "a", z),
            (1, "b", z),
            (2, "a", c(3, 1.5)),
            (2, "c", c(1, 4.0)),
            (3, "a", c(1, 0.5)),
        ];
        let by_cb = aggregate_conflict(scores.clone(), Scope::Article, 1, RankKey::Cb).unwrap();
        let order: Vec<Option<u64>> = by_cb.iter().map(|e| e.page_id).collect();
        assert_eq!(order, vec![Some(2), Some(3), Some(1)]);
        assert_eq!(by_cb[2].sum_cb, 0);

        let global = aggregate_conflict(scores.clone(), Scope::StringGlobal, 2, RankKey::Cb).unwrap();
        assert_eq!(global.len(), 1);
        assert_eq!(global[0].str.as_deref(), Some("a"));
        assert_eq!(global[0].n, 3);
        assert!((global[0].cb_norm - 4.0 / 3.0).abs() < 1e-12);
        assert!((global[0].ct_norm - 2.0 / 3.0).abs() < 1e-12);

        let in_article = aggregate_conflict(scores.clone(), Scope::StringInArticle, 1, RankKey::Ct).unwrap();
        assert_eq!(in_article[0].page_id, Some(2));
        assert_eq!(in_article[0].str.as_deref(), Some("c"));

        assert!(aggregate_conflict(scores, Scope::Article, 0, RankKey::Cb).is_err());
    }

    proptest! {
        #[test]
        fn weights_are_ordered(a in 2i64..3600, b in 2i64..3600) {
            prop_assume!(a < b);
            prop_assert!(undo_weight(a) > undo_weight(b));
            prop_assert!(undo_weight(b) >= 1.0);
        }

        #[test]
        fn merge_matches_single_pass(
            items in proptest::collection::vec((1u64..5, 0usize..4, 0u64..5, 0u32..100), 0..60),
            split in 0usize..60,
        ) {
            let strs = ["a", "b", "c", "d"];
            let items: Vec<(u64, &str, ConflictScore)> = items
                .into_iter()
                .map(|(p, s, cb, ct)| (p, strs[s], ConflictScore { cb, ct: ct as f64 / 4.0 }))
                .collect();
            let split = split.min(items.len());
            for scope in [Scope::Article, Scope::StringGlobal, Scope::StringInArticle] {
                let whole = aggregate_conflict(items.iter().copied(), scope, 1, RankKey::Cb).unwrap();
                let mut left = ConflictAggregator::new(scope);
                let mut right = ConflictAggregator::new(scope);
                for &(p, s, c) in &items[..split] { left.add(p, s, c); }
                for &(p, s, c) in &items[split..] { right.add(p, s, c); }
                right.merge(left);
                prop_assert_eq!(right.finish(1, RankKey::Cb).unwrap(), whole);
            }
        }
    }
}
