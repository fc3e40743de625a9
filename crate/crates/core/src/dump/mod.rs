//! MediaWiki XML export ingestion.
//!
//! [`DumpReader`] streams `<page>` elements one at a time out of a
//! pages-meta-history export (plain, gzip or bzip2). Each page comes back with
//! its revisions sorted by `(timestamp, rev_id)`. [`keep_page`] implements the
//! article filter: main namespace, latest revision present and not a redirect.

mod hash;
mod parser;

use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

pub use hash::{base36_sha1_to_hex, content_hash, hex_to_base36_sha1};
pub use parser::{open_dump, Compression, DumpError, DumpReader, DumpStats};

/// Who made a revision.
///
/// The serialized form is the decimal user id for registered editors and
/// `0|<identifier>` for unregistered ones (usually an IP address).
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum EditorId {
    Registered(u64),
    Unregistered(String),
}

pub const UNREGISTERED_PREFIX: &str = "0|";

impl EditorId {
    pub fn is_registered(&self) -> bool {
        matches!(self, EditorId::Registered(_))
    }
}

impl fmt::Display for EditorId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EditorId::Registered(id) => write!(f, "{id}"),
            EditorId::Unregistered(name) => write!(f, "{UNREGISTERED_PREFIX}{name}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid editor id {0:?}: expected a positive user id or a `0|`-prefixed identifier")]
pub struct ParseEditorError(pub String);

impl FromStr for EditorId {
    type Err = ParseEditorError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if let Some(rest) = s.strip_prefix(UNREGISTERED_PREFIX) {
            return Ok(EditorId::Unregistered(rest.to_owned()));
        }
        match s.parse::<u64>() {
            Ok(id) if id > 0 && !s.starts_with('+') => Ok(EditorId::Registered(id)),
            _ => Err(ParseEditorError(s.to_owned())),
        }
    }
}

impl TryFrom<String> for EditorId {
    type Error = ParseEditorError;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<EditorId> for String {
    fn from(e: EditorId) -> Self {
        e.to_string()
    }
}

/// One revision of a page as read from the dump.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RevisionRecord {
    pub rev_id: u64,
    pub page_id: u64,
    pub timestamp: DateTime<Utc>,
    pub editor: EditorId,
    /// Account name, when the dump supplies one. Not part of the output format.
    pub username: Option<String>,
    /// Full wikitext; `None` when the revision text was suppressed.
    pub text: Option<String>,
    /// Lowercase hex SHA-1 of `text`, or converted from the dump's own
    /// digest when the text is suppressed.
    pub content_hash: Option<String>,
}

impl RevisionRecord {
    /// Builds a revision with text present, computing its content hash.
    pub fn new(
        page_id: u64,
        rev_id: u64,
        timestamp: DateTime<Utc>,
        editor: EditorId,
        text: impl Into<String>,
    ) -> Self {
        let text = text.into();
        let content_hash = Some(content_hash(&text));
        RevisionRecord {
            rev_id,
            page_id,
            timestamp,
            editor,
            username: None,
            text: Some(text),
            content_hash,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PageRecord {
    pub page_id: u64,
    pub title: String,
    pub namespace: i64,
    /// Target of the page-level `<redirect>` element, if any. Informational;
    /// filtering looks at the latest revision's text instead.
    pub redirect_title: Option<String>,
    pub revisions: Vec<RevisionRecord>,
}

impl PageRecord {
    /// Orders revisions by timestamp, ties broken by revision id.
    pub fn sort_revisions(&mut self) {
        self.revisions
            .sort_by(|a, b| (a.timestamp, a.rev_id).cmp(&(b.timestamp, b.rev_id)));
    }

    pub fn latest(&self) -> Option<&RevisionRecord> {
        self.revisions.last()
    }
}

/// True iff `text`, after leading whitespace, starts with `#REDIRECT`
/// (case-insensitive).
pub fn is_redirect(text: &str) -> bool {
    const MARKER: &[u8] = b"#redirect";
    let rest = text.trim_start().as_bytes();
    rest.len() >= MARKER.len() && rest[..MARKER.len()].eq_ignore_ascii_case(MARKER)
}

/// The article filter: main namespace, and the latest revision has text that
/// is not a redirect. Pages without revisions are never kept.
pub fn keep_page(page: &PageRecord) -> bool {
    if page.namespace != 0 {
        return false;
    }
    match page.latest().and_then(|r| r.text.as_deref()) {
        Some(text) => !is_redirect(text),
        None => false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::TimeZone;

    fn page(ns: i64, texts: &[Option<&str>]) -> PageRecord {
        let revisions = texts
            .iter()
            .enumerate()
            .map(|(i, t)| {
                let ts = Utc.with_ymd_and_hms(2010, 1, 1, 0, 0, i as u32).unwrap();
                let mut r = RevisionRecord::new(1, i as u64 + 1, ts, EditorId::Registered(7), "");
                r.text = t.map(str::to_owned);
                r
            })
            .collect();
        PageRecord {
            page_id: 1,
            title: "T".into(),
            namespace: ns,
            redirect_title: None,
            revisions,
        }
    }

    #[test]
    fn redirect_detection() {
        assert!(is_redirect("#redirect [[X]]"));
        assert!(is_redirect("  #REDIRECT [[X]]"));
        assert!(is_redirect("\n\t#ReDiReCt[[X]]"));
        assert!(!is_redirect("See #REDIRECT usage"));
        assert!(!is_redirect("#redir"));
        assert!(!is_redirect(""));
    }

    #[test]
    fn page_filter() {
        assert!(!keep_page(&page(1, &[Some("talk")])));
        assert!(!keep_page(&page(0, &[Some("prose"), Some("#REDIRECT [[Foo]]")])));
        assert!(keep_page(&page(0, &[Some("#REDIRECT [[Foo]]"), Some("prose")])));
        assert!(keep_page(&page(0, &[Some("ordinary prose")])));
        assert!(!keep_page(&page(0, &[Some("prose"), None])));
        assert!(!keep_page(&page(0, &[])));
    }

    #[test]
    fn editor_id_forms() {
        assert_eq!("4528".parse(), Ok(EditorId::Registered(4528)));
        assert_eq!(
            "0|203.0.113.7".parse(),
            Ok(EditorId::Unregistered("203.0.113.7".into()))
        );
        assert_eq!(EditorId::Unregistered("198.51.100.2".into()).to_string(), "0|198.51.100.2");
        assert!("0".parse::<EditorId>().is_err());
        assert!("-3".parse::<EditorId>().is_err());
        assert!("+3".parse::<EditorId>().is_err());
        assert!("abc".parse::<EditorId>().is_err());
    }

    #[test]
    fn revisions_sort_with_rev_id_tiebreak() {
        let ts = Utc.with_ymd_and_hms(2016, 10, 31, 23, 59, 59).unwrap();
        let mk = |id| RevisionRecord::new(1, id, ts, EditorId::Registered(1), "x");
        let mut p = PageRecord {
            page_id: 1,
            title: "x".into(),
            namespace: 0,
            redirect_title: None,
            revisions: vec![mk(9), mk(3), mk(5)],
        };
        p.sort_revisions();
        let ids: Vec<u64> = p.revisions.iter().map(|r| r.rev_id).collect();
        assert_eq!(ids, [3, 5, 9]);
    }
}
