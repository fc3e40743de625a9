use super::*;
use crate::dump::PageRecord;
use crate::fixtures::{toy_revisions, TOY_PAGE_ID, TOY_REV_IDS};
use crate::synth::{random_history, revert_history, SynthConfig};
use crate::tokenize::tokenize;
use chrono::{Duration, TimeZone};
use proptest::prelude::*;

fn rev(page: u64, id: u64, secs: i64, text: Option<&str>) -> RevisionRecord {
    let ts = Utc.with_ymd_and_hms(2010, 1, 1, 0, 0, 0).unwrap() + Duration::seconds(secs);
    let mut r = RevisionRecord::new(page, id, ts, crate::dump::EditorId::Registered(1), text.unwrap_or(""));
    if text.is_none() {
        r.text = None;
        r.content_hash = None;
    }
    r
}

fn texts_to_revs(texts: &[&str]) -> Vec<RevisionRecord> {
    texts
        .iter()
        .enumerate()
        .map(|(i, t)| rev(7, i as u64 + 1, i as i64 * 60, Some(t)))
        .collect()
}

fn by_id(a: &FinalizedArticle) -> Vec<TokenHistory> {
    a.all_histories().into_iter().cloned().collect()
}

#[test]
fn toy_article_histories() {
    let [r1, r2, r3, r4] = TOY_REV_IDS;
    let tracked = track_revisions(TOY_PAGE_ID, &toy_revisions()).unwrap();
    let got: Vec<(u64, String, u64, Vec<u64>, Vec<u64>)> = by_id(&tracked.article)
        .into_iter()
        .map(|h| (h.token_id, h.str, h.origin_rev_id, h.outs, h.ins))
        .collect();
    let row = |id: u64, s: &str, o: u64, outs: &[u64], ins: &[u64]| {
        (id, s.to_string(), o, outs.to_vec(), ins.to_vec())
    };
    let expected = vec![
        row(1, "cats", r1, &[r4], &[]),
        row(2, "purr", r1, &[r4], &[]),
        row(3, ".", r1, &[r4], &[]),
        row(4, "dogs", r1, &[r4], &[]),
        row(5, "bark", r1, &[r2, r4], &[r3]),
        row(6, "loudly", r1, &[r2], &[]),
        row(7, "sleep", r2, &[r3], &[]),
        row(8, "lots", r2, &[r3], &[]),
        row(9, "they", r2, &[r3], &[r4]),
        row(10, "were", r2, &[r3], &[r4]),
        row(11, "very", r2, &[], &[]),
        row(12, "glad", r2, &[], &[]),
        row(13, "wow", r3, &[r4], &[]),
    ];
    assert_eq!(got, expected);

    let counts: Vec<usize> = tracked.events.iter().map(RevisionEvents::action_count).collect();
    assert_eq!(counts, vec![6, 8, 6, 8]);
    let current: Vec<u64> = tracked.article.current.iter().map(|h| h.token_id).collect();
    assert_eq!(current, vec![9, 10, 11, 12]);
    assert!(tracked.article.current.iter().all(|h| h.last_rev_id == r4));
    let last: Vec<u64> = tracked.article.deleted.iter().map(|h| h.last_rev_id).collect();
    assert_eq!(last, vec![r3, r3, r3, r3, r3, r1, r2, r2, r3]);
}

#[test]
fn identical_revision_is_a_no_op() {
    let revs = texts_to_revs(&["a b. c", "a b. c"]);
    let t = track_revisions(7, &revs).unwrap();
    assert_eq!(t.events[1].action_count(), 0);
    assert_eq!(t.article.current.len(), 4);
    assert!(t.article.current.iter().all(|h| h.outs.is_empty() && h.last_rev_id == 2));
}

#[test]
fn removed_then_restored_word_keeps_identity() {
    let revs = texts_to_revs(&["a b c", "a c", "a b c"]);
    let t = track_revisions(7, &revs).unwrap();
    let h = by_id(&t.article);
    assert_eq!(h.len(), 3);
    assert_eq!((h[1].str.as_str(), h[1].outs.clone(), h[1].ins.clone()), ("b", vec![2], vec![3]));
    assert!(h[0].outs.is_empty() && h[2].outs.is_empty());
    assert_eq!(t.events[2].res, vec![2]);
    assert!(t.events[2].adds.is_empty());
}

#[test]
fn single_revision_article() {
    let revs = texts_to_revs(&["Hello, world!"]);
    let t = track_revisions(7, &revs).unwrap();
    assert_eq!(t.article.current.len(), 4);
    assert!(t.article.deleted.is_empty());
    for h in &t.article.current {
        assert_eq!((h.origin_rev_id, h.last_rev_id), (1, 1));
        assert!(h.outs.is_empty() && h.ins.is_empty());
    }
}

#[test]
fn out_of_order_revision_is_rejected() {
    let mut s = ArticleState::new(7);
    s.process_revision(&rev(7, 5, 100, Some("x"))).unwrap();
    assert_eq!(
        s.process_revision(&rev(7, 6, 50, Some("y"))),
        Err(TrackError::OutOfOrder { prev_rev_id: 5, rev_id: 6 })
    );
    // equal timestamps fall back to the revision id
    assert_eq!(
        s.process_revision(&rev(7, 4, 100, Some("y"))),
        Err(TrackError::OutOfOrder { prev_rev_id: 5, rev_id: 4 })
    );
    assert!(s.process_revision(&rev(7, 6, 100, Some("y"))).is_ok());
    assert_eq!(
        s.process_revision(&rev(8, 9, 200, Some("y"))),
        Err(TrackError::WrongPage { expected: 7, got: 8, rev_id: 9 })
    );
}

#[test]
fn absent_text_is_skipped() {
    let revs = vec![
        rev(7, 1, 0, Some("a b")),
        rev(7, 2, 10, None),
        rev(7, 3, 20, Some("a b c")),
    ];
    let t = track_revisions(7, &revs).unwrap();
    assert_eq!(t.skipped, vec![2]);
    assert_eq!(t.article.revision_ids, vec![1, 3]);
    assert_eq!(t.events.len(), 2);
}

#[test]
fn reconstruct_unknown_revision() {
    let t = track_revisions(TOY_PAGE_ID, &toy_revisions()).unwrap();
    let err = reconstruct_revision(t.article.all_histories(), &t.article.revision_ids, 99);
    assert_eq!(err, Err(TrackError::UnknownRevision(99)));
}

#[test]
fn paragraph_move_preserves_identity() {
    let revs = texts_to_revs(&["one two.\n\nthree four.", "three four.\n\none two."]);
    let t = track_revisions(7, &revs).unwrap();
    assert_eq!(t.events[1].action_count(), 0);
    assert_eq!(t.article.current.len(), 6);
}

#[test]
fn repeated_paragraphs_get_distinct_tokens() {
    let revs = texts_to_revs(&["x y.\n\nx y.", "x y.", "x y.\n\nx y.\n\nx y."]);
    let t = track_revisions(7, &revs).unwrap();
    assert_eq!(t.events[1].dels.len(), 3);
    // one paragraph comes back from history, the third is new
    assert_eq!(t.events[2].res.len(), 3);
    assert_eq!(t.events[2].adds.len(), 3);
}

#[test]
fn interned_instances_do_not_grow_with_repeats() {
    let a = "alpha beta.\n\ngamma delta.";
    let b = "alpha beta.\n\ngamma epsilon.";
    let texts: Vec<&str> = (0..200).map(|i| if i % 2 == 0 { a } else { b }).collect();
    let mut s = ArticleState::new(7);
    for r in texts_to_revs(&texts) {
        s.process_revision(&r).unwrap();
    }
    let st = s.stats();
    assert_eq!(st.tokens, 7);
    assert!(st.stored_token_refs <= 12, "{st:?}");
    assert!(st.stored_layout_refs <= 4, "{st:?}");
}

fn check_reconstruction(page: &PageRecord) -> Result<(), TestCaseError> {
    let tracked = track_revisions(page.page_id, &page.revisions).unwrap();
    let hist = tracked.article.all_histories();
    for r in &page.revisions {
        let want = multiset(tokenize(r.text.as_deref().unwrap()));
        let got = reconstruct_revision(hist.iter().copied(), &tracked.article.revision_ids, r.rev_id).unwrap();
        prop_assert_eq!(got, want, "revision {}", r.rev_id);
    }
    Ok(())
}

fn check_invariants(page: &PageRecord) -> Result<(), TestCaseError> {
    let tracked = track_revisions(page.page_id, &page.revisions).unwrap();
    let order: HashMap<u64, usize> = tracked
        .article
        .revision_ids
        .iter()
        .enumerate()
        .map(|(i, &r)| (r, i))
        .collect();
    let hist = tracked.article.all_histories();
    for (i, h) in hist.iter().enumerate() {
        prop_assert_eq!(h.token_id, i as u64 + 1);
        let o = order[&h.origin_rev_id];
        prop_assert!(h.outs.len() == h.ins.len() || h.outs.len() == h.ins.len() + 1);
        let mut prev = o;
        for k in 0..h.outs.len() {
            let out = order[&h.outs[k]];
            prop_assert!(out > prev);
            prev = out;
            if let Some(&r) = h.ins.get(k) {
                let inn = order[&r];
                prop_assert!(inn > prev);
                prev = inn;
            }
        }
        let last = order[&h.last_rev_id];
        if h.is_present() {
            prop_assert_eq!(last, order.len() - 1);
        } else {
            prop_assert_eq!(last + 1, order[h.outs.last().unwrap()]);
        }
    }
    let mut prev_len = 0i64;
    for (ev, r) in tracked.events.iter().zip(&page.revisions) {
        let len = tokenize(r.text.as_deref().unwrap()).len() as i64;
        prop_assert_eq!(
            len - prev_len,
            ev.adds.len() as i64 + ev.res.len() as i64 - ev.dels.len() as i64
        );
        prev_len = len;
    }
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn reconstruction_matches_every_revision(seed in 0u64..10_000, vocab in 4usize..80) {
        let cfg = SynthConfig { revisions: 40, target_tokens: 200, vocabulary: vocab, seed };
        check_reconstruction(&random_history(&cfg, 1, 1))?;
    }

    #[test]
    fn history_invariants_hold(seed in 0u64..10_000, vocab in 4usize..80) {
        let cfg = SynthConfig { revisions: 40, target_tokens: 200, vocabulary: vocab, seed };
        check_invariants(&random_history(&cfg, 1, 1))?;
    }

    #[test]
    fn tracking_is_deterministic(seed in 0u64..10_000) {
        let cfg = SynthConfig { revisions: 25, target_tokens: 150, vocabulary: 20, seed };
        let page = random_history(&cfg, 1, 1);
        let a = track_revisions(1, &page.revisions).unwrap();
        let b = track_revisions(1, &page.revisions).unwrap();
        prop_assert_eq!(a.article, b.article);
        prop_assert_eq!(a.events, b.events);
    }

    #[test]
    fn restoring_an_earlier_text_adds_nothing(seed in 0u64..10_000, pick in 0usize..1000) {
        let cfg = SynthConfig { revisions: 30, target_tokens: 150, vocabulary: 15, seed };
        let mut page = random_history(&cfg, 1, 1);
        let earlier = page.revisions[pick % page.revisions.len()].clone();
        let last = page.revisions.last().unwrap();
        let restore = RevisionRecord::new(
            1,
            last.rev_id + 1,
            last.timestamp + Duration::seconds(1),
            last.editor.clone(),
            earlier.text.clone().unwrap(),
        );
        page.revisions.push(restore);
        let t = track_revisions(1, &page.revisions).unwrap();
        prop_assert!(t.events.last().unwrap().adds.is_empty());
    }

    #[test]
    fn revert_scenarios_reconstruct(seed in 0u64..10_000) {
        let cfg = SynthConfig { revisions: 40, target_tokens: 120, vocabulary: 0, seed };
        check_reconstruction(&revert_history(&cfg, 1, 1).page)?;
    }
}

