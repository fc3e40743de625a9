//! Token identity tracking across an article's revision history.
//!
//! Each revision is split into paragraphs (blank-line separated) and
//! sentences (ending after `.`, `!`, `?` or a newline). Matching runs at three
//! levels, each considering the previous revision first and then every
//! earlier revision of the article:
//!
//! 1. whole paragraphs by content hash,
//! 2. sentences of the still unmatched paragraphs by content hash,
//! 3. a longest-common-subsequence diff of the leftover tokens against the
//!    previous revision's unclaimed tokens.
//!
//! A matched unit hands its token identities to the new revision. Tokens
//! that were absent from the previous revision but come back through a
//! historical match are reinsertions; unmatched new tokens get fresh ids and
//! unclaimed old tokens are deletions.

mod diff;

use std::collections::hash_map::DefaultHasher;
use std::collections::{BTreeMap, HashMap, VecDeque};
use std::hash::Hasher;

use chrono::{DateTime, Utc};

pub use diff::lcs_pairs;

use crate::dump::RevisionRecord;
use crate::tokenize::tokenize_into;

/// The full life of one token instance within an article.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct TokenHistory {
    /// 1-based, assigned in creation order.
    pub token_id: u64,
    pub str: String,
    pub origin_rev_id: u64,
    /// Revisions in which the token was deleted, in article order.
    pub outs: Vec<u64>,
    /// Revisions in which it was reinserted; `ins[i]` follows `outs[i]`.
    pub ins: Vec<u64>,
    /// Last revision in which the token was present.
    pub last_rev_id: u64,
}

impl TokenHistory {
    pub fn is_present(&self) -> bool {
        self.outs.len() == self.ins.len()
    }
}

/// What one revision did to the article's tokens.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct RevisionEvents {
    pub rev_id: u64,
    pub adds: Vec<u64>,
    pub dels: Vec<u64>,
    pub res: Vec<u64>,
}

impl RevisionEvents {
    pub fn action_count(&self) -> usize {
        self.adds.len() + self.dels.len() + self.res.len()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TrackError {
    #[error("revision {rev_id} arrives out of order after revision {prev_rev_id}")]
    OutOfOrder { prev_rev_id: u64, rev_id: u64 },
    #[error("revision {rev_id} has no text; skipped")]
    TextAbsent { rev_id: u64 },
    #[error("revision {rev_id} belongs to page {got}, not {expected}")]
    WrongPage { expected: u64, got: u64, rev_id: u64 },
    #[error("revision {0} is not part of this article")]
    UnknownRevision(u64),
}

/// A token multiset: string value to number of instances.
pub type TokenMultiset = BTreeMap<String, usize>;

/// Builds a [`TokenMultiset`] from token strings.
pub fn multiset<S: AsRef<str>>(tokens: impl IntoIterator<Item = S>) -> TokenMultiset {
    let mut m = TokenMultiset::new();
    for t in tokens {
        *m.entry(t.as_ref().to_owned()).or_default() += 1;
    }
    m
}

#[derive(Clone)]
struct Sentence {
    hash: u64,
    tokens: Vec<u32>,
    last_seen: u32,
}

#[derive(Clone)]
struct Paragraph {
    hash: u64,
    sentences: Vec<u32>,
    last_seen: u32,
}

/// Counters describing how much an [`ArticleState`] holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StateStats {
    pub revisions: usize,
    pub tokens: usize,
    pub paragraph_instances: usize,
    pub sentence_instances: usize,
    /// Token references stored across all sentence instances.
    pub stored_token_refs: usize,
    /// Paragraph references stored across distinct revision layouts.
    pub stored_layout_refs: usize,
}

/// Tracking state for one article.
#[derive(Clone)]
pub struct ArticleState {
    page_id: u64,
    histories: Vec<TokenHistory>,
    present: Vec<bool>,
    /// Per token: stamp of the revision that last claimed it.
    claimed: Vec<u32>,
    sentences: Vec<Sentence>,
    paragraphs: Vec<Paragraph>,
    sentence_index: HashMap<u64, Vec<u32>>,
    paragraph_index: HashMap<u64, Vec<u32>>,
    /// Whole-revision content hash to the distinct paragraph layouts seen
    /// with that hash, each with the ordinal it was last seen at.
    revision_index: HashMap<u64, Vec<(u32, Vec<u32>)>>,
    /// Paragraph instances of the previous revision, in order.
    current: Vec<u32>,
    revisions: Vec<u64>,
    last_key: Option<(DateTime<Utc>, u64)>,
}

/// A unit of the incoming revision during matching.
struct NewSentence {
    hash: u64,
    tokens: Vec<String>,
    matched: Option<u32>,
}

struct NewParagraph {
    hash: u64,
    sentences: Vec<NewSentence>,
    matched: Option<u32>,
}

fn hash_tokens<S: AsRef<str>>(tokens: &[S]) -> u64 {
    let mut h = DefaultHasher::new();
    for t in tokens {
        h.write(t.as_ref().as_bytes());
        // 0xff never occurs in UTF-8
        h.write_u8(0xff);
    }
    h.finish()
}

fn hash_hashes(hashes: impl Iterator<Item = u64>) -> u64 {
    let mut h = DefaultHasher::new();
    for x in hashes {
        h.write_u64(x);
    }
    h.finish()
}

/// Splits on runs of two or more newlines.
fn split_paragraphs(text: &str) -> Vec<&str> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut start = 0;
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i] == b'\n' && bytes.get(i + 1) == Some(&b'\n') {
            out.push(&text[start..i]);
            while i < bytes.len() && bytes[i] == b'\n' {
                i += 1;
            }
            start = i;
        } else {
            i += 1;
        }
    }
    out.push(&text[start..]);
    out
}

/// Splits after every `.`, `!`, `?` and newline.
fn split_sentences(paragraph: &str) -> impl Iterator<Item = &str> {
    paragraph.split_inclusive(['.', '!', '?', '\n'])
}

fn segment(text: &str) -> Vec<NewParagraph> {
    let mut paragraphs = Vec::new();
    for p in split_paragraphs(text) {
        let mut sentences = Vec::new();
        for s in split_sentences(p) {
            let mut tokens = Vec::new();
            tokenize_into(s, &mut tokens);
            if !tokens.is_empty() {
                sentences.push(NewSentence {
                    hash: hash_tokens(&tokens),
                    tokens,
                    matched: None,
                });
            }
        }
        if !sentences.is_empty() {
            paragraphs.push(NewParagraph {
                hash: hash_hashes(sentences.iter().map(|s| s.hash)),
                sentences,
                matched: None,
            });
        }
    }
    paragraphs
}

impl ArticleState {
    pub fn new(page_id: u64) -> Self {
        ArticleState {
            page_id,
            histories: Vec::new(),
            present: Vec::new(),
            claimed: Vec::new(),
            sentences: Vec::new(),
            paragraphs: Vec::new(),
            sentence_index: HashMap::new(),
            paragraph_index: HashMap::new(),
            revision_index: HashMap::new(),
            current: Vec::new(),
            revisions: Vec::new(),
            last_key: None,
        }
    }

    pub fn page_id(&self) -> u64 {
        self.page_id
    }

    /// All token histories created so far, indexed by `token_id - 1`.
    pub fn histories(&self) -> &[TokenHistory] {
        &self.histories
    }

    /// Processed revision ids in article order.
    pub fn revision_ids(&self) -> &[u64] {
        &self.revisions
    }

    /// Token ids of the previous revision, in document order.
    pub fn current_tokens(&self) -> Vec<u64> {
        self.current_token_indices()
            .map(|t| t as u64 + 1)
            .collect()
    }

    fn current_token_indices(&self) -> impl Iterator<Item = u32> + '_ {
        self.current.iter().flat_map(move |&p| {
            self.paragraphs[p as usize]
                .sentences
                .iter()
                .flat_map(move |&s| self.sentences[s as usize].tokens.iter().copied())
        })
    }

    pub fn stats(&self) -> StateStats {
        StateStats {
            revisions: self.revisions.len(),
            tokens: self.histories.len(),
            paragraph_instances: self.paragraphs.len(),
            sentence_instances: self.sentences.len(),
            stored_token_refs: self.sentences.iter().map(|s| s.tokens.len()).sum(),
            stored_layout_refs: self
                .revision_index
                .values()
                .flatten()
                .map(|(_, p)| p.len())
                .sum(),
        }
    }

    fn sentence_strings_equal(&self, id: u32, tokens: &[String]) -> bool {
        let s = &self.sentences[id as usize];
        s.tokens.len() == tokens.len()
            && s
                .tokens
                .iter()
                .zip(tokens)
                .all(|(&t, new)| self.histories[t as usize].str == *new)
    }

    fn sentence_unclaimed(&self, id: u32, stamp: u32) -> bool {
        self.sentences[id as usize]
            .tokens
            .iter()
            .all(|&t| self.claimed[t as usize] != stamp)
    }

    fn paragraph_fits(&self, id: u32, new: &NewParagraph, stamp: u32) -> bool {
        let p = &self.paragraphs[id as usize];
        p.sentences.len() == new.sentences.len()
            && p
                .sentences
                .iter()
                .zip(&new.sentences)
                .all(|(&s, ns)| self.sentence_strings_equal(s, &ns.tokens))
            && p.sentences.iter().all(|&s| self.sentence_unclaimed(s, stamp))
    }

    fn sentence_fits(&self, id: u32, new: &NewSentence, stamp: u32) -> bool {
        self.sentence_strings_equal(id, &new.tokens) && self.sentence_unclaimed(id, stamp)
    }

    fn claim_sentence(&mut self, id: u32, stamp: u32) {
        for &t in &self.sentences[id as usize].tokens {
            self.claimed[t as usize] = stamp;
        }
    }

    fn claim_paragraph(&mut self, id: u32, stamp: u32) {
        for i in 0..self.paragraphs[id as usize].sentences.len() {
            let s = self.paragraphs[id as usize].sentences[i];
            self.claim_sentence(s, stamp);
        }
    }

    /// Most recently seen historical instance (ties: newest instance) among
    /// `candidates` accepted by `fits`.
    fn best_historical(
        candidates: Option<&Vec<u32>>,
        last_seen: impl Fn(u32) -> u32,
        fits: impl Fn(u32) -> bool,
    ) -> Option<u32> {
        candidates?
            .iter()
            .copied()
            .filter(|&id| fits(id))
            .max_by_key(|&id| (last_seen(id), id))
    }

    /// Processes the next revision of the article.
    ///
    /// On [`TrackError::TextAbsent`] the state is left untouched and the
    /// caller may continue with the next revision.
    pub fn process_revision(&mut self, rev: &RevisionRecord) -> Result<RevisionEvents, TrackError> {
        if rev.page_id != self.page_id {
            return Err(TrackError::WrongPage {
                expected: self.page_id,
                got: rev.page_id,
                rev_id: rev.rev_id,
            });
        }
        let key = (rev.timestamp, rev.rev_id);
        if let Some(last) = self.last_key {
            if key <= last {
                return Err(TrackError::OutOfOrder {
                    prev_rev_id: last.1,
                    rev_id: rev.rev_id,
                });
            }
        }
        let Some(text) = rev.text.as_deref() else {
            return Err(TrackError::TextAbsent { rev_id: rev.rev_id });
        };
        self.last_key = Some(key);
        Ok(self.apply(rev.rev_id, text))
    }

    fn apply(&mut self, rev_id: u64, text: &str) -> RevisionEvents {
        let ordinal = self.revisions.len() as u32;
        let stamp = ordinal + 1;
        self.revisions.push(rev_id);
        let mut new = segment(text);
        let rev_hash = hash_hashes(new.iter().map(|p| p.hash));

        // 0. an exact restore of an earlier revision reuses its layout
        let restored = self.revision_index.get(&rev_hash).and_then(|layouts| {
            layouts
                .iter()
                .filter(|(_, paras)| {
                    paras.len() == new.len()
                        && paras
                            .iter()
                            .zip(&new)
                            .all(|(&id, np)| self.paragraph_fits(id, np, stamp))
                })
                .max_by_key(|(seen, _)| *seen)
                .map(|(_, paras)| paras.clone())
        });
        if let Some(paras) = restored {
            for (np, id) in new.iter_mut().zip(paras) {
                self.claim_paragraph(id, stamp);
                np.matched = Some(id);
            }
        }

        // 1a. paragraphs against the previous revision
        let mut prev_paras: HashMap<u64, VecDeque<u32>> = HashMap::new();
        for &p in &self.current {
            prev_paras
                .entry(self.paragraphs[p as usize].hash)
                .or_default()
                .push_back(p);
        }
        for np in new.iter_mut().filter(|p| p.matched.is_none()) {
            if let Some(queue) = prev_paras.get_mut(&np.hash) {
                if let Some(pos) = queue.iter().position(|&id| self.paragraph_fits(id, np, stamp)) {
                    let id = queue.remove(pos).unwrap();
                    self.claim_paragraph(id, stamp);
                    np.matched = Some(id);
                }
            }
        }
        // 1b. remaining paragraphs against the whole history
        for np in new.iter_mut().filter(|p| p.matched.is_none()) {
            let found = Self::best_historical(
                self.paragraph_index.get(&np.hash),
                |id| self.paragraphs[id as usize].last_seen,
                |id| self.paragraph_fits(id, np, stamp),
            );
            if let Some(id) = found {
                self.claim_paragraph(id, stamp);
                np.matched = Some(id);
            }
        }

        // 2a. sentences of unmatched paragraphs against the previous revision
        let mut prev_sents: HashMap<u64, VecDeque<u32>> = HashMap::new();
        for &p in &self.current {
            for &s in &self.paragraphs[p as usize].sentences {
                prev_sents
                    .entry(self.sentences[s as usize].hash)
                    .or_default()
                    .push_back(s);
            }
        }
        for np in new.iter_mut().filter(|p| p.matched.is_none()) {
            for ns in np.sentences.iter_mut() {
                if let Some(queue) = prev_sents.get_mut(&ns.hash) {
                    if let Some(pos) = queue.iter().position(|&id| self.sentence_fits(id, ns, stamp)) {
                        let id = queue.remove(pos).unwrap();
                        self.claim_sentence(id, stamp);
                        ns.matched = Some(id);
                    }
                }
            }
        }
        // 2b. remaining sentences against the whole history
        for np in new.iter_mut().filter(|p| p.matched.is_none()) {
            for ns in np.sentences.iter_mut().filter(|s| s.matched.is_none()) {
                let found = Self::best_historical(
                    self.sentence_index.get(&ns.hash),
                    |id| self.sentences[id as usize].last_seen,
                    |id| self.sentence_fits(id, ns, stamp),
                );
                if let Some(id) = found {
                    self.claim_sentence(id, stamp);
                    ns.matched = Some(id);
                }
            }
        }

        // 3. diff leftover tokens against the previous revision's unclaimed tokens
        let old_left: Vec<u32> = self
            .current_token_indices()
            .filter(|&t| self.claimed[t as usize] != stamp)
            .collect();
        let new_left: Vec<&str> = new
            .iter()
            .filter(|p| p.matched.is_none())
            .flat_map(|p| p.sentences.iter().filter(|s| s.matched.is_none()))
            .flat_map(|s| s.tokens.iter().map(String::as_str))
            .collect();
        let mut diff_match: Vec<Option<u32>> = vec![None; new_left.len()];
        if !old_left.is_empty() && !new_left.is_empty() {
            let old_strs: Vec<&str> = old_left
                .iter()
                .map(|&t| self.histories[t as usize].str.as_str())
                .collect();
            for (i, j) in lcs_pairs(&old_strs, &new_left) {
                diff_match[j] = Some(old_left[i]);
            }
        }

        // build instances for the new revision and assign identities
        let mut events = RevisionEvents {
            rev_id,
            ..Default::default()
        };
        let mut next_left = 0usize;
        let mut paragraph_ids = Vec::with_capacity(new.len());
        for np in new {
            if let Some(id) = np.matched {
                paragraph_ids.push(id);
                continue;
            }
            let mut sentence_ids = Vec::with_capacity(np.sentences.len());
            for ns in np.sentences {
                if let Some(id) = ns.matched {
                    sentence_ids.push(id);
                    continue;
                }
                let mut ids = Vec::with_capacity(ns.tokens.len());
                for tok in ns.tokens {
                    let t = match diff_match[next_left] {
                        Some(t) => t,
                        None => {
                            let t = self.create_token(tok, rev_id, stamp);
                            events.adds.push(t as u64 + 1);
                            t
                        }
                    };
                    self.claimed[t as usize] = stamp;
                    next_left += 1;
                    ids.push(t);
                }
                sentence_ids.push(self.intern_sentence(ns.hash, ids));
            }
            paragraph_ids.push(self.intern_paragraph(np.hash, sentence_ids));
        }

        // presence transitions
        let old_tokens: Vec<u32> = self.current_token_indices().collect();
        for t in old_tokens {
            if self.claimed[t as usize] != stamp {
                self.present[t as usize] = false;
                self.histories[t as usize].outs.push(rev_id);
                events.dels.push(t as u64 + 1);
            }
        }
        for &p in &paragraph_ids {
            self.paragraphs[p as usize].last_seen = ordinal;
            for i in 0..self.paragraphs[p as usize].sentences.len() {
                let s = self.paragraphs[p as usize].sentences[i] as usize;
                self.sentences[s].last_seen = ordinal;
                for j in 0..self.sentences[s].tokens.len() {
                    let t = self.sentences[s].tokens[j] as usize;
                    if !self.present[t] {
                        self.present[t] = true;
                        self.histories[t].ins.push(rev_id);
                        events.res.push(t as u64 + 1);
                    }
                    self.histories[t].last_rev_id = rev_id;
                }
            }
        }
        events.dels.sort_unstable();
        events.res.sort_unstable();
        let layouts = self.revision_index.entry(rev_hash).or_default();
        match layouts.iter_mut().find(|(_, paras)| *paras == paragraph_ids) {
            Some(entry) => entry.0 = ordinal,
            None => layouts.push((ordinal, paragraph_ids.clone())),
        }
        self.current = paragraph_ids;
        events
    }

    fn create_token(&mut self, s: String, rev_id: u64, stamp: u32) -> u32 {
        let idx = self.histories.len() as u32;
        self.histories.push(TokenHistory {
            token_id: idx as u64 + 1,
            str: s,
            origin_rev_id: rev_id,
            outs: Vec::new(),
            ins: Vec::new(),
            last_rev_id: rev_id,
        });
        // marked present so the transition pass does not count it as a reinsertion
        self.present.push(true);
        self.claimed.push(stamp);
        idx
    }

    fn intern_sentence(&mut self, hash: u64, tokens: Vec<u32>) -> u32 {
        if let Some(ids) = self.sentence_index.get(&hash) {
            if let Some(&id) = ids.iter().find(|&&id| self.sentences[id as usize].tokens == tokens) {
                return id;
            }
        }
        let id = self.sentences.len() as u32;
        self.sentences.push(Sentence {
            hash,
            tokens,
            last_seen: 0,
        });
        self.sentence_index.entry(hash).or_default().push(id);
        id
    }

    fn intern_paragraph(&mut self, hash: u64, sentences: Vec<u32>) -> u32 {
        if let Some(ids) = self.paragraph_index.get(&hash) {
            if let Some(&id) = ids
                .iter()
                .find(|&&id| self.paragraphs[id as usize].sentences == sentences)
            {
                return id;
            }
        }
        let id = self.paragraphs.len() as u32;
        self.paragraphs.push(Paragraph {
            hash,
            sentences,
            last_seen: 0,
        });
        self.paragraph_index.entry(hash).or_default().push(id);
        id
    }

    /// Splits all histories into tokens present in the final revision and
    /// tokens deleted by then.
    pub fn finalize(self) -> FinalizedArticle {
        let (current, deleted) = self.histories.into_iter().partition(TokenHistory::is_present);
        FinalizedArticle {
            page_id: self.page_id,
            revision_ids: self.revisions,
            current,
            deleted,
        }
    }
}

/// Output of a fully processed article.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FinalizedArticle {
    pub page_id: u64,
    /// Processed revisions in article order.
    pub revision_ids: Vec<u64>,
    /// Tokens present in the last revision (`|outs| == |ins|`).
    pub current: Vec<TokenHistory>,
    /// Tokens absent from the last revision (`|outs| == |ins| + 1`).
    pub deleted: Vec<TokenHistory>,
}

impl FinalizedArticle {
    pub fn last_rev_id(&self) -> Option<u64> {
        self.revision_ids.last().copied()
    }

    /// Current and deleted histories merged back into token id order.
    pub fn all_histories(&self) -> Vec<&TokenHistory> {
        let mut all: Vec<&TokenHistory> = self.current.iter().chain(&self.deleted).collect();
        all.sort_by_key(|h| h.token_id);
        all
    }
}

/// Result of running the tracker over one page.
#[derive(Clone, Debug)]
pub struct TrackedArticle {
    pub article: FinalizedArticle,
    pub events: Vec<RevisionEvents>,
    /// Revisions skipped because their text was suppressed.
    pub skipped: Vec<u64>,
}

/// Runs every revision of a page through a fresh [`ArticleState`].
pub fn track_revisions<'a>(
    page_id: u64,
    revisions: impl IntoIterator<Item = &'a RevisionRecord>,
) -> Result<TrackedArticle, TrackError> {
    let mut state = ArticleState::new(page_id);
    let mut events = Vec::new();
    let mut skipped = Vec::new();
    for rev in revisions {
        match state.process_revision(rev) {
            Ok(ev) => events.push(ev),
            Err(TrackError::TextAbsent { rev_id }) => skipped.push(rev_id),
            Err(e) => return Err(e),
        }
    }
    Ok(TrackedArticle {
        article: state.finalize(),
        events,
        skipped,
    })
}

/// Recreates the token multiset of revision `rev_id` from origin/out/in
/// lists alone. `revision_order` lists the article's revisions in order.
pub fn reconstruct_revision<'a>(
    histories: impl IntoIterator<Item = &'a TokenHistory>,
    revision_order: &[u64],
    rev_id: u64,
) -> Result<TokenMultiset, TrackError> {
    let position: HashMap<u64, usize> = revision_order
        .iter()
        .enumerate()
        .map(|(i, &r)| (r, i))
        .collect();
    let target = *position
        .get(&rev_id)
        .ok_or(TrackError::UnknownRevision(rev_id))?;
    let pos = |r: u64| position.get(&r).copied().ok_or(TrackError::UnknownRevision(r));
    let mut out = TokenMultiset::new();
    for h in histories {
        if pos(h.origin_rev_id)? > target {
            continue;
        }
        let mut outs = 0;
        for &r in &h.outs {
            if pos(r)? <= target {
                outs += 1;
            }
        }
        let mut ins = 0;
        for &r in &h.ins {
            if pos(r)? <= target {
                ins += 1;
            }
        }
        if outs == ins {
            *out.entry(h.str.clone()).or_default() += 1;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests;
