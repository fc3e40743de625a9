//! Token-level provenance tracking for revisioned wiki articles.
//!
//! The pipeline: [`dump`] streams pages out of a MediaWiki export,
//! [`tokenize`] turns wikitext into tokens, [`tracker`] follows every token
//! instance through an article's history, [`dataset`] reads and writes the
//! batch CSV files, and [`analytics`] computes survival, conflict and revert
//! statistics from the tracked histories.

pub mod dump;
pub mod tokenize;
pub mod tracker;
pub mod fixtures;
pub mod synth;
pub mod dataset;
pub mod analytics;

pub use dump::{EditorId, PageRecord, RevisionRecord};
pub use tracker::{
    reconstruct_revision, track_revisions, ArticleState, FinalizedArticle, RevisionEvents,
    TokenHistory, TrackError,
};
