//! Small hand-built article histories used by tests, benchmarks and docs.

use chrono::{DateTime, Duration, TimeZone, Utc};

use crate::dump::{EditorId, PageRecord, RevisionRecord};

pub const TOY_PAGE_ID: u64 = 42;
pub const TOY_REV_IDS: [u64; 4] = [1001, 1002, 1003, 1004];

/// Texts of the four-revision toy article.
///
/// Resulting tokens after the last revision:
///
/// | id | str    | origin | out          | in     |
/// |----|--------|--------|--------------|--------|
/// | 1  | cats   | R1     | R4           |        |
/// | 2  | purr   | R1     | R4           |        |
/// | 3  | .      | R1     | R4           |        |
/// | 4  | dogs   | R1     | R4           |        |
/// | 5  | bark   | R1     | R2, R4       | R3     |
/// | 6  | loudly | R1     | R2           |        |
/// | 7  | sleep  | R2     | R3           |        |
/// | 8  | lots   | R2     | R3           |        |
/// | 9  | they   | R2     | R3           | R4     |
/// | 10 | were   | R2     | R3           | R4     |
/// | 11 | very   | R2     |              |        |
/// | 12 | glad   | R2     |              |        |
/// | 13 | wow    | R3     | R4           |        |
pub const TOY_TEXTS: [&str; 4] = [
    "Cats purr.\nDogs bark\nloudly",
    "Cats purr.\nDogs sleep lots\nthey were\nvery glad",
    "Cats purr.\nDogs bark\nvery glad\nwow",
    "they were\nvery glad",
];

/// Seconds between consecutive toy revisions: one hour, then 20 seconds, then
/// one hour.
pub const TOY_GAPS: [i64; 3] = [3600, 20, 3600];

pub fn toy_start() -> DateTime<Utc> {
    Utc.with_ymd_and_hms(2016, 3, 1, 12, 0, 0).unwrap()
}

/// The toy history with four distinct registered editors (ids 101..=104).
pub fn toy_revisions() -> Vec<RevisionRecord> {
    toy_revisions_with_editors([101, 102, 103, 104])
}

/// The toy history with caller-chosen registered editor ids.
pub fn toy_revisions_with_editors(editors: [u64; 4]) -> Vec<RevisionRecord> {
    let mut ts = toy_start();
    (0..4)
        .map(|i| {
            if i > 0 {
                ts += Duration::seconds(TOY_GAPS[i - 1]);
            }
            RevisionRecord::new(
                TOY_PAGE_ID,
                TOY_REV_IDS[i],
                ts,
                EditorId::Registered(editors[i]),
                TOY_TEXTS[i],
            )
        })
        .collect()
}

pub fn toy_page() -> PageRecord {
    PageRecord {
        page_id: TOY_PAGE_ID,
        title: "Toy".into(),
        namespace: 0,
        redirect_title: None,
        revisions: toy_revisions(),
    }
}

/// Renders pages as a MediaWiki XML export.
pub fn to_mediawiki_xml(pages: &[PageRecord]) -> String {
    fn esc(s: &str) -> String {
        s.replace('&', "&amp;")
            .replace('<', "&lt;")
            .replace('>', "&gt;")
            .replace('"', "&quot;")
    }
    let mut out = String::from(
        "<mediawiki xmlns=\"http://www.mediawiki.org/xml/export-0.10/\" version=\"0.10\" xml:lang=\"en\">\n  <siteinfo>\n    <sitename>Wikipedia</sitename>\n  </siteinfo>\n",
    );
    for p in pages {
        out.push_str(&format!(
            "  <page>\n    <title>{}</title>\n    <ns>{}</ns>\n    <id>{}</id>\n",
            esc(&p.title),
            p.namespace,
            p.page_id
        ));
        if let Some(r) = &p.redirect_title {
            out.push_str(&format!("    <redirect title=\"{}\" />\n", esc(r)));
        }
        for r in &p.revisions {
            out.push_str(&format!(
                "    <revision>\n      <id>{}</id>\n      <timestamp>{}</timestamp>\n",
                r.rev_id,
                r.timestamp.format("%Y-%m-%dT%H:%M:%SZ")
            ));
            match &r.editor {
                EditorId::Registered(id) => out.push_str(&format!(
                    "      <contributor>\n        <username>{}</username>\n        <id>{id}</id>\n      </contributor>\n",
                    esc(r.username.as_deref().unwrap_or("User"))
                )),
                EditorId::Unregistered(ip) => out.push_str(&format!(
                    "      <contributor>\n        <ip>{}</ip>\n      </contributor>\n",
                    esc(ip)
                )),
            }
            match &r.text {
                Some(t) => out.push_str(&format!(
                    "      <text bytes=\"{}\" xml:space=\"preserve\">{}</text>\n",
                    t.len(),
                    esc(t)
                )),
                None => out.push_str("      <text deleted=\"deleted\" />\n"),
            }
            if let Some(h) = r.content_hash.as_deref().and_then(crate::dump::hex_to_base36_sha1) {
                out.push_str(&format!("      <sha1>{h}</sha1>\n"));
            }
            out.push_str("    </revision>\n");
        }
        out.push_str("  </page>\n");
    }
    out.push_str("</mediawiki>\n");
    out
}
