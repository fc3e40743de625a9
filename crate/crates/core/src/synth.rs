//! Synthetic article histories.
//!
//! Documents are modelled as paragraphs of sentences of words and rendered to
//! wikitext-like strings. Two generators are provided:
//!
//! * [`random_history`]: arbitrary inserts, deletes, moves, replacements and
//!   reverts to earlier states, with a small vocabulary so repeated strings
//!   are common.
//! * [`revert_history`]: plain edits interleaved with "edit then restore"
//!   runs whose intermediate edits never interact. The restoring revisions
//!   are known in advance, which makes the two revert detection methods
//!   comparable.

use std::collections::{BTreeSet, HashSet};

use chrono::{DateTime, Duration, TimeZone, Utc};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dump::{EditorId, PageRecord, RevisionRecord};

#[derive(Clone, Debug, PartialEq, Eq)]
struct Word {
    text: String,
    uid: u64,
}

type Sentence = Vec<Word>;
type Paragraph = Vec<Sentence>;

#[derive(Clone, Debug, Default, PartialEq, Eq)]
struct Doc {
    paragraphs: Vec<Paragraph>,
}

impl Doc {
    fn render(&self) -> String {
        let mut out = String::new();
        for (pi, p) in self.paragraphs.iter().enumerate() {
            if pi > 0 {
                out.push_str("\n\n");
            }
            for (si, s) in p.iter().enumerate() {
                if si > 0 {
                    out.push(' ');
                }
                for (wi, w) in s.iter().enumerate() {
                    if wi > 0 {
                        out.push(' ');
                    }
                    out.push_str(&w.text);
                }
                out.push('.');
            }
        }
        out
    }

    fn word_count(&self) -> usize {
        self.paragraphs.iter().flatten().map(|s| s.len() + 1).sum()
    }

    fn prune(&mut self) {
        for p in &mut self.paragraphs {
            p.retain(|s| !s.is_empty());
        }
        self.paragraphs.retain(|p| !p.is_empty());
    }
}

/// Parameters for [`random_history`] and [`revert_history`].
#[derive(Clone, Debug)]
pub struct SynthConfig {
    pub revisions: usize,
    /// Approximate number of tokens the article hovers around.
    pub target_tokens: usize,
    /// Distinct plain words to draw from; small values produce many
    /// repeated strings.
    pub vocabulary: usize,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            revisions: 50,
            target_tokens: 300,
            vocabulary: 60,
            seed: 1,
        }
    }
}

const MARKUP: &[&str] = &["[[", "]]", "{{", "}}", "|", ",", "'''", "=", "%", "(", ")", "<ref>"];

struct Gen {
    rng: ChaCha8Rng,
    vocabulary: usize,
    markup: bool,
    next_uid: u64,
    clock: DateTime<Utc>,
}

impl Gen {
    fn new(seed: u64, vocabulary: usize, markup: bool) -> Self {
        Gen {
            rng: ChaCha8Rng::seed_from_u64(seed),
            vocabulary: vocabulary.max(1),
            markup,
            next_uid: 0,
            clock: Utc.with_ymd_and_hms(2005, 1, 1, 0, 0, 0).unwrap(),
        }
    }

    fn uid(&mut self) -> u64 {
        self.next_uid += 1;
        self.next_uid
    }

    fn word(&mut self) -> Word {
        let text = if self.markup && self.rng.gen_bool(0.12) {
            MARKUP.choose(&mut self.rng).unwrap().to_string()
        } else {
            let n = self.rng.gen_range(0..self.vocabulary);
            let w = format!("w{n}");
            if self.rng.gen_bool(0.1) {
                w.to_uppercase()
            } else {
                w
            }
        };
        Word {
            text,
            uid: self.uid(),
        }
    }

    fn fresh_word(&mut self) -> Word {
        let uid = self.uid();
        Word {
            text: format!("fresh{uid}"),
            uid,
        }
    }

    fn sentence(&mut self, fresh: bool) -> Sentence {
        let len = self.rng.gen_range(3..=12);
        (0..len)
            .map(|_| if fresh { self.fresh_word() } else { self.word() })
            .collect()
    }

    fn paragraph(&mut self, fresh: bool) -> Paragraph {
        let len = self.rng.gen_range(1..=4);
        (0..len).map(|_| self.sentence(fresh)).collect()
    }

    fn doc(&mut self, target_tokens: usize, fresh: bool) -> Doc {
        let mut d = Doc::default();
        while d.word_count() < target_tokens {
            let p = self.paragraph(fresh);
            d.paragraphs.push(p);
        }
        d
    }

    fn tick(&mut self) -> DateTime<Utc> {
        let secs = match self.rng.gen_range(0..10) {
            0 => 0,
            1..=3 => self.rng.gen_range(1..120),
            4..=6 => self.rng.gen_range(120..86_400),
            _ => self.rng.gen_range(86_400..20 * 86_400),
        };
        self.clock += Duration::seconds(secs);
        self.clock
    }

    fn editor(&mut self) -> EditorId {
        if self.rng.gen_bool(0.3) {
            EditorId::Unregistered(format!("10.0.{}.{}", self.rng.gen_range(0..4), self.rng.gen_range(1..20)))
        } else {
            EditorId::Registered(self.rng.gen_range(1..40))
        }
    }

    fn pick_sentence(&mut self, d: &Doc) -> Option<(usize, usize)> {
        if d.paragraphs.is_empty() {
            return None;
        }
        let p = self.rng.gen_range(0..d.paragraphs.len());
        let s = self.rng.gen_range(0..d.paragraphs[p].len());
        Some((p, s))
    }

    /// One random structural edit.
    fn mutate(&mut self, d: &mut Doc, target_tokens: usize, history: &[Doc]) {
        let shrink = d.word_count() > target_tokens;
        let op = self.rng.gen_range(0..11);
        match op {
            0 | 1 => {
                if let Some((p, s)) = self.pick_sentence(d) {
                    let n = self.rng.gen_range(1..=5);
                    for _ in 0..n {
                        let w = self.word();
                        let sent = &mut d.paragraphs[p][s];
                        let at = self.rng.gen_range(0..=sent.len());
                        if !shrink {
                            sent.insert(at, w);
                        }
                    }
                }
            }
            2 | 3 => {
                if let Some((p, s)) = self.pick_sentence(d) {
                    let sent = &mut d.paragraphs[p][s];
                    let at = self.rng.gen_range(0..sent.len());
                    let n = self.rng.gen_range(1..=5).min(sent.len() - at);
                    sent.drain(at..at + n);
                }
            }
            4 => {
                if !shrink || d.paragraphs.is_empty() {
                    let sent = self.sentence(false);
                    if d.paragraphs.is_empty() {
                        d.paragraphs.push(vec![sent]);
                    } else {
                        let p = self.rng.gen_range(0..d.paragraphs.len());
                        let at = self.rng.gen_range(0..=d.paragraphs[p].len());
                        d.paragraphs[p].insert(at, sent);
                    }
                }
            }
            5 => {
                if let Some((p, s)) = self.pick_sentence(d) {
                    d.paragraphs[p].remove(s);
                }
            }
            6 => {
                // move a sentence to another place in the article
                if let Some((p, s)) = self.pick_sentence(d) {
                    let sent = d.paragraphs[p].remove(s);
                    d.prune();
                    if d.paragraphs.is_empty() {
                        d.paragraphs.push(vec![sent]);
                    } else {
                        let q = self.rng.gen_range(0..d.paragraphs.len());
                        let at = self.rng.gen_range(0..=d.paragraphs[q].len());
                        d.paragraphs[q].insert(at, sent);
                    }
                }
            }
            7 => {
                // move a paragraph
                if d.paragraphs.len() > 1 {
                    let from = self.rng.gen_range(0..d.paragraphs.len());
                    let para = d.paragraphs.remove(from);
                    let to = self.rng.gen_range(0..=d.paragraphs.len());
                    d.paragraphs.insert(to, para);
                }
            }
            8 => {
                if let Some((p, s)) = self.pick_sentence(d) {
                    let w = self.word();
                    let sent = &mut d.paragraphs[p][s];
                    let at = self.rng.gen_range(0..sent.len());
                    sent[at] = w;
                }
            }
            9 => {
                // full revert to an earlier state
                if !history.is_empty() {
                    *d = history[self.rng.gen_range(0..history.len())].clone();
                }
            }
            _ => {
                // restore a single paragraph from an earlier state
                if !history.is_empty() {
                    let old = &history[self.rng.gen_range(0..history.len())];
                    if !old.paragraphs.is_empty() {
                        let para = old.paragraphs[self.rng.gen_range(0..old.paragraphs.len())].clone();
                        let at = self.rng.gen_range(0..=d.paragraphs.len());
                        d.paragraphs.insert(at, para);
                    }
                }
            }
        }
        d.prune();
    }
}

fn page(page_id: u64, revisions: Vec<RevisionRecord>) -> PageRecord {
    PageRecord {
        page_id,
        title: format!("Synthetic {page_id}"),
        namespace: 0,
        redirect_title: None,
        revisions,
    }
}

/// A random article history with arbitrary edits, moves and reverts.
///
/// Revision ids start at `first_rev_id` and increase by one.
pub fn random_history(cfg: &SynthConfig, page_id: u64, first_rev_id: u64) -> PageRecord {
    let mut g = Gen::new(cfg.seed, cfg.vocabulary, true);
    let mut doc = g.doc(cfg.target_tokens, false);
    let mut history: Vec<Doc> = Vec::new();
    let mut revisions = Vec::with_capacity(cfg.revisions);
    for i in 0..cfg.revisions {
        if i > 0 {
            let ops = g.rng.gen_range(1..=3);
            for _ in 0..ops {
                g.mutate(&mut doc, cfg.target_tokens, &history);
            }
        }
        let ts = g.tick();
        let editor = g.editor();
        revisions.push(RevisionRecord::new(
            page_id,
            first_rev_id + i as u64,
            ts,
            editor,
            doc.render(),
        ));
        history.push(doc.clone());
    }
    page(page_id, revisions)
}

/// Output of [`revert_history`].
#[derive(Clone, Debug)]
pub struct RevertScenario {
    pub page: PageRecord,
    /// `(restoring revision, edited revision)` for every edit undone by a
    /// restore.
    pub expected_pairs: BTreeSet<(u64, u64)>,
}

/// Plain edits interleaved with edit-then-restore runs.
///
/// Plain edits only append fresh sentences or delete base words, so no plain
/// revision ever undoes all actions of another. Each run applies one to
/// three edits to distinct paragraphs and then restores the exact text from
/// before the run.
pub fn revert_history(cfg: &SynthConfig, page_id: u64, first_rev_id: u64) -> RevertScenario {
    // no markup: repeated punctuation would make word-level deletions ambiguous
    let mut g = Gen::new(cfg.seed, cfg.vocabulary.max(100_000), false);
    let mut doc = g.doc(cfg.target_tokens.max(60), false);
    let base_words: usize = doc.word_count();
    let mut touched: HashSet<u64> = HashSet::new();
    let mut plain_deleted = 0usize;
    let mut revisions: Vec<RevisionRecord> = Vec::new();
    let mut expected = BTreeSet::new();
    let mut next_rev = first_rev_id;

    let mut push = |g: &mut Gen, doc: &Doc, revisions: &mut Vec<RevisionRecord>| -> u64 {
        let ts = g.tick();
        let editor = g.editor();
        let id = next_rev;
        next_rev += 1;
        revisions.push(RevisionRecord::new(page_id, id, ts, editor, doc.render()));
        id
    };
    push(&mut g, &doc, &mut revisions);

    let base_uids: HashSet<u64> = doc
        .paragraphs
        .iter()
        .flatten()
        .flatten()
        .map(|w| w.uid)
        .collect();

    while revisions.len() < cfg.revisions {
        let remaining = cfg.revisions - revisions.len();
        if remaining >= 2 && g.rng.gen_bool(0.45) {
            let snapshot = doc.clone();
            let k = g.rng.gen_range(1..=3usize).min(remaining - 1).min(doc.paragraphs.len());
            let mut paras: Vec<usize> = (0..doc.paragraphs.len()).collect();
            paras.shuffle(&mut g.rng);
            let mut edited = Vec::new();
            for &p in paras.iter().take(k) {
                vandalize(&mut g, &mut doc, p, &base_uids, &mut touched);
                edited.push(push(&mut g, &doc, &mut revisions));
            }
            doc = snapshot;
            let restore = push(&mut g, &doc, &mut revisions);
            for e in edited {
                expected.insert((restore, e));
            }
        } else {
            let can_delete = plain_deleted + 3 < base_words / 2;
            if can_delete && g.rng.gen_bool(0.5) {
                let n = delete_untouched(&mut g, &mut doc, &base_uids, &mut touched, 3);
                plain_deleted += n;
                if n == 0 {
                    append_fresh_sentence(&mut g, &mut doc);
                }
            } else {
                append_fresh_sentence(&mut g, &mut doc);
            }
            doc.prune();
            push(&mut g, &doc, &mut revisions);
        }
    }
    RevertScenario {
        page: page(page_id, revisions),
        expected_pairs: expected,
    }
}

fn append_fresh_sentence(g: &mut Gen, doc: &mut Doc) {
    let s = g.sentence(true);
    let p = g.rng.gen_range(0..doc.paragraphs.len());
    doc.paragraphs[p].push(s);
}

/// Deletes up to `max` base words never touched before. Returns how many
/// were deleted.
fn delete_untouched(
    g: &mut Gen,
    doc: &mut Doc,
    base: &HashSet<u64>,
    touched: &mut HashSet<u64>,
    max: usize,
) -> usize {
    let mut slots: Vec<(usize, usize, usize)> = Vec::new();
    for (p, para) in doc.paragraphs.iter().enumerate() {
        for (s, sent) in para.iter().enumerate() {
            // keep at least two words per sentence
            if sent.len() <= 2 {
                continue;
            }
            for (w, word) in sent.iter().enumerate() {
                if base.contains(&word.uid) && !touched.contains(&word.uid) {
                    slots.push((p, s, w));
                }
            }
        }
    }
    let Some(&(p, s, w)) = slots.choose(&mut g.rng) else {
        return 0;
    };
    let sent = &mut doc.paragraphs[p][s];
    let mut n = 0;
    let i = w;
    while n < max && i < sent.len() && sent.len() > 2 {
        if base.contains(&sent[i].uid) && !touched.contains(&sent[i].uid) {
            touched.insert(sent[i].uid);
            sent.remove(i);
            n += 1;
        } else {
            break;
        }
    }
    n
}

/// An edit confined to paragraph `p`: inserts fresh words, deletes
/// untouched base words, or both.
fn vandalize(
    g: &mut Gen,
    doc: &mut Doc,
    p: usize,
    base: &HashSet<u64>,
    touched: &mut HashSet<u64>,
) {
    let mode = g.rng.gen_range(0..3);
    let mut changed = false;
    if mode != 1 {
        let s = g.rng.gen_range(0..doc.paragraphs[p].len());
        let n = g.rng.gen_range(1..=4);
        for _ in 0..n {
            let w = g.fresh_word();
            let sent = &mut doc.paragraphs[p][s];
            let at = g.rng.gen_range(0..=sent.len());
            sent.insert(at, w);
        }
        changed = true;
    }
    if mode != 0 {
        let mut single = Doc {
            paragraphs: vec![doc.paragraphs[p].clone()],
        };
        if delete_untouched(g, &mut single, base, touched, 3) > 0 {
            doc.paragraphs[p] = single.paragraphs.pop().unwrap();
            changed = true;
        }
    }
    if !changed {
        let s = g.rng.gen_range(0..doc.paragraphs[p].len());
        let w = g.fresh_word();
        doc.paragraphs[p][s].push(w);
    }
}
