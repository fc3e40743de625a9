//! Inputs shared by the criterion benchmarks.

use toktrack::synth::{random_history, SynthConfig};
use toktrack::PageRecord;

/// A synthetic article with `revisions` revisions of about `tokens` tokens.
pub fn article(revisions: usize, tokens: usize, seed: u64) -> PageRecord {
    let cfg = SynthConfig {
        revisions,
        target_tokens: tokens,
        vocabulary: 500,
        seed,
    };
    random_history(&cfg, 1, 1)
}

/// Text of the last revision of [`article`].
pub fn article_text(tokens: usize) -> String {
    article(2, tokens, 7)
        .revisions
        .pop()
        .and_then(|r| r.text)
        .unwrap_or_default()
}
