use std::fs::File;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;

use chrono::{DateTime, Utc};
use quick_xml::events::{BytesStart, Event};
use quick_xml::Reader;

use super::hash::{base36_sha1_to_hex, content_hash, hex_to_base36_sha1};
use super::{EditorId, PageRecord, RevisionRecord};

#[derive(Debug, thiserror::Error)]
pub enum DumpError {
    #[error("I/O error reading dump: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed XML at byte {offset}: {message}")]
    Xml { offset: u64, message: String },
    #[error("invalid <{field}> value {value:?} at byte {offset}")]
    InvalidField {
        field: &'static str,
        value: String,
        offset: u64,
    },
    #[error("missing <{field}> in {element} ending at byte {offset}")]
    MissingField {
        field: &'static str,
        element: &'static str,
        offset: u64,
    },
    #[error("dump truncated inside a page; last complete page id: {last_complete_page:?}")]
    Truncated { last_complete_page: Option<u64> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Compression {
    /// Decide from the file extension (`.gz`, `.bz2`).
    #[default]
    Auto,
    None,
    Gzip,
    Bzip2,
}

/// Opens a dump file for streaming.
pub fn open_dump(
    path: impl AsRef<Path>,
    compression: Compression,
) -> Result<DumpReader<Box<dyn BufRead + Send>>, DumpError> {
    let path = path.as_ref();
    let file = File::open(path)?;
    let compression = match compression {
        Compression::Auto => match path.extension().and_then(|e| e.to_str()) {
            Some("gz") => Compression::Gzip,
            Some("bz2") => Compression::Bzip2,
            _ => Compression::None,
        },
        c => c,
    };
    let inner: Box<dyn Read + Send> = match compression {
        Compression::Gzip => Box::new(flate2::read::MultiGzDecoder::new(BufReader::new(file))),
        Compression::Bzip2 => Box::new(bzip2::read::MultiBzDecoder::new(BufReader::new(file))),
        _ => Box::new(file),
    };
    Ok(DumpReader::new(
        Box::new(BufReader::with_capacity(1 << 16, inner)) as Box<dyn BufRead + Send>
    ))
}

/// Running counters for a dump being read.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct DumpStats {
    pub pages: u64,
    pub revisions: u64,
    /// Revisions whose text hash disagreed with the dump's `<sha1>`.
    pub sha1_mismatches: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Tag {
    Page,
    Title,
    Ns,
    Id,
    Revision,
    Timestamp,
    Contributor,
    Username,
    Ip,
    Text,
    Sha1,
    Other,
}

impl Tag {
    fn from_name(name: &[u8]) -> Tag {
        match name {
            b"page" => Tag::Page,
            b"title" => Tag::Title,
            b"ns" => Tag::Ns,
            b"id" => Tag::Id,
            b"revision" => Tag::Revision,
            b"timestamp" => Tag::Timestamp,
            b"contributor" => Tag::Contributor,
            b"username" => Tag::Username,
            b"ip" => Tag::Ip,
            b"text" => Tag::Text,
            b"sha1" => Tag::Sha1,
            _ => Tag::Other,
        }
    }
}

#[derive(Default)]
struct PageBuilder {
    id: Option<u64>,
    title: Option<String>,
    ns: Option<i64>,
    redirect: Option<String>,
    revisions: Vec<RevisionRecord>,
}

#[derive(Default)]
struct RevisionBuilder {
    id: Option<u64>,
    timestamp: Option<DateTime<Utc>>,
    user_id: Option<u64>,
    username: Option<String>,
    ip: Option<String>,
    text: Option<String>,
    text_deleted: bool,
    sha1: Option<String>,
}

/// Streaming reader over `<page>` elements.
///
/// Holds at most one page's revisions in memory at a time. Iteration stops
/// after the first error.
pub struct DumpReader<R: BufRead> {
    xml: Reader<R>,
    buf: Vec<u8>,
    stack: Vec<Tag>,
    chars: String,
    last_page: Option<u64>,
    stats: DumpStats,
    done: bool,
}

impl<R: BufRead> DumpReader<R> {
    pub fn new(reader: R) -> Self {
        let mut xml = Reader::from_reader(reader);
        xml.config_mut().trim_text(false);
        DumpReader {
            xml,
            buf: Vec::with_capacity(1 << 12),
            stack: Vec::new(),
            chars: String::new(),
            last_page: None,
            stats: DumpStats::default(),
            done: false,
        }
    }

    pub fn stats(&self) -> DumpStats {
        self.stats
    }

    /// Capacity of the internal event buffer; stays bounded by the largest
    /// single XML event, not the dump size.
    pub fn buffer_capacity(&self) -> usize {
        self.buf.capacity()
    }

    fn offset(&self) -> u64 {
        self.xml.buffer_position()
    }

    fn xml_err(&self, e: impl std::fmt::Display) -> DumpError {
        DumpError::Xml {
            offset: self.xml.error_position().max(self.offset()),
            message: e.to_string(),
        }
    }

    fn parent(&self) -> Option<Tag> {
        self.stack.len().checked_sub(2).map(|i| self.stack[i])
    }

    /// Reads the next page, or `None` at end of input.
    pub fn next_page(&mut self) -> Result<Option<PageRecord>, DumpError> {
        let mut page: Option<PageBuilder> = None;
        let mut rev: Option<RevisionBuilder> = None;
        loop {
            self.buf.clear();
            let event = match self.xml.read_event_into(&mut self.buf) {
                Ok(ev) => ev.into_owned(),
                Err(e) => return Err(self.xml_err(e)),
            };
            match event {
                Event::Start(start) => {
                    let tag = Tag::from_name(start.local_name().as_ref());
                    self.stack.push(tag);
                    self.chars.clear();
                    self.on_open(tag, &start, &mut page, &mut rev, false)?;
                }
                Event::Empty(start) => {
                    let tag = Tag::from_name(start.local_name().as_ref());
                    self.stack.push(tag);
                    self.chars.clear();
                    self.on_open(tag, &start, &mut page, &mut rev, true)?;
                    if let Some(done) = self.on_close(tag, &mut page, &mut rev)? {
                        return Ok(Some(done));
                    }
                }
                Event::Text(t) => {
                    if self.captures_text() {
                        let s = t.unescape().map_err(|e| self.xml_err(e))?;
                        self.chars.push_str(&s);
                    }
                }
                Event::CData(c) => {
                    if self.captures_text() {
                        let bytes = c.into_inner();
                        let s = std::str::from_utf8(&bytes).map_err(|e| self.xml_err(e))?;
                        self.chars.push_str(s);
                    }
                }
                Event::End(end) => {
                    let tag = Tag::from_name(end.local_name().as_ref());
                    if self.stack.last() != Some(&tag) {
                        return Err(self.xml_err(format!(
                            "unexpected closing tag </{}>",
                            String::from_utf8_lossy(end.name().as_ref())
                        )));
                    }
                    if let Some(done) = self.on_close(tag, &mut page, &mut rev)? {
                        return Ok(Some(done));
                    }
                }
                Event::Eof => {
                    self.done = true;
                    if page.is_some() {
                        return Err(DumpError::Truncated {
                            last_complete_page: self.last_page,
                        });
                    }
                    return Ok(None);
                }
                _ => {}
            }
        }
    }

    fn captures_text(&self) -> bool {
        matches!(
            self.stack.last(),
            Some(
                Tag::Title
                    | Tag::Ns
                    | Tag::Id
                    | Tag::Timestamp
                    | Tag::Username
                    | Tag::Ip
                    | Tag::Text
                    | Tag::Sha1
            )
        )
    }

    fn on_open(
        &mut self,
        tag: Tag,
        start: &BytesStart,
        page: &mut Option<PageBuilder>,
        rev: &mut Option<RevisionBuilder>,
        empty: bool,
    ) -> Result<(), DumpError> {
        match tag {
            Tag::Page => *page = Some(PageBuilder::default()),
            Tag::Revision if page.is_some() => *rev = Some(RevisionBuilder::default()),
            Tag::Other if start.local_name().as_ref() == b"redirect" => {
                if let Some(p) = page.as_mut() {
                    let title = attr(start, b"title").map_err(|e| self.xml_err(e))?;
                    p.redirect = Some(title.unwrap_or_default());
                }
            }
            Tag::Text => {
                if let Some(r) = rev.as_mut() {
                    let deleted = attr(start, b"deleted")
                        .map_err(|e| self.xml_err(e))?
                        .is_some();
                    r.text_deleted = deleted;
                    // `<text bytes="0" />` is an empty revision, not a suppressed one
                    if empty && !deleted {
                        r.text = Some(String::new());
                    }
                    if let Some(sha1) = attr(start, b"sha1").map_err(|e| self.xml_err(e))? {
                        r.sha1.get_or_insert(sha1);
                    }
                }
            }
            _ => {}
        }
        Ok(())
    }

    fn on_close(
        &mut self,
        tag: Tag,
        page: &mut Option<PageBuilder>,
        rev: &mut Option<RevisionBuilder>,
    ) -> Result<Option<PageRecord>, DumpError> {
        let parent = self.parent();
        let offset = self.offset();
        let value = std::mem::take(&mut self.chars);
        self.stack.pop();
        match (tag, parent) {
            (Tag::Title, Some(Tag::Page)) => {
                if let Some(p) = page.as_mut() {
                    p.title = Some(value);
                }
            }
            (Tag::Ns, Some(Tag::Page)) => {
                if let Some(p) = page.as_mut() {
                    p.ns = Some(parse_num(&value, "ns", offset)?);
                }
            }
            (Tag::Id, Some(Tag::Page)) => {
                if let Some(p) = page.as_mut() {
                    p.id = Some(parse_positive(&value, "id", offset)?);
                }
            }
            (Tag::Id, Some(Tag::Revision)) => {
                if let Some(r) = rev.as_mut() {
                    r.id = Some(parse_positive(&value, "id", offset)?);
                }
            }
            (Tag::Id, Some(Tag::Contributor)) => {
                if let Some(r) = rev.as_mut() {
                    r.user_id = Some(parse_num(&value, "id", offset)?);
                }
            }
            (Tag::Timestamp, Some(Tag::Revision)) => {
                if let Some(r) = rev.as_mut() {
                    let ts = DateTime::parse_from_rfc3339(value.trim()).map_err(|_| {
                        DumpError::InvalidField {
                            field: "timestamp",
                            value: value.clone(),
                            offset,
                        }
                    })?;
                    r.timestamp = Some(ts.with_timezone(&Utc));
                }
            }
            (Tag::Username, Some(Tag::Contributor)) => {
                if let Some(r) = rev.as_mut() {
                    r.username = Some(value);
                }
            }
            (Tag::Ip, Some(Tag::Contributor)) => {
                if let Some(r) = rev.as_mut() {
                    r.ip = Some(value);
                }
            }
            (Tag::Text, Some(Tag::Revision)) => {
                if let Some(r) = rev.as_mut() {
                    if !r.text_deleted {
                        r.text = Some(value);
                    }
                }
            }
            (Tag::Sha1, Some(Tag::Revision)) => {
                if let Some(r) = rev.as_mut() {
                    let v = value.trim();
                    if !v.is_empty() {
                        r.sha1 = Some(v.to_owned());
                    }
                }
            }
            (Tag::Revision, _) => {
                if let (Some(p), Some(r)) = (page.as_mut(), rev.take()) {
                    let record = self.build_revision(r, p.id, offset)?;
                    p.revisions.push(record);
                }
            }
            (Tag::Page, _) => {
                if let Some(p) = page.take() {
                    let page_id = p.id.ok_or(DumpError::MissingField {
                        field: "id",
                        element: "page",
                        offset,
                    })?;
                    let mut record = PageRecord {
                        page_id,
                        title: p.title.unwrap_or_default(),
                        namespace: p.ns.unwrap_or(0),
                        redirect_title: p.redirect,
                        revisions: p.revisions,
                    };
                    for r in &mut record.revisions {
                        r.page_id = page_id;
                    }
                    record.sort_revisions();
                    self.last_page = Some(page_id);
                    self.stats.pages += 1;
                    return Ok(Some(record));
                }
            }
            _ => {}
        }
        Ok(None)
    }

    fn build_revision(
        &mut self,
        r: RevisionBuilder,
        page_id: Option<u64>,
        offset: u64,
    ) -> Result<RevisionRecord, DumpError> {
        let missing = |field| DumpError::MissingField {
            field,
            element: "revision",
            offset,
        };
        let rev_id = r.id.ok_or_else(|| missing("id"))?;
        let timestamp = r.timestamp.ok_or_else(|| missing("timestamp"))?;
        let editor = match (r.user_id, r.ip) {
            (Some(id), _) if id > 0 => EditorId::Registered(id),
            (_, Some(ip)) => EditorId::Unregistered(ip),
            (_, None) => EditorId::Unregistered(r.username.clone().unwrap_or_default()),
        };
        let content_hash = match &r.text {
            Some(text) => {
                let hex = content_hash(text);
                if let Some(dump_sha1) = &r.sha1 {
                    if hex_to_base36_sha1(&hex).as_deref() != Some(dump_sha1.as_str()) {
                        self.stats.sha1_mismatches += 1;
                        tracing::warn!(rev_id, "text hash disagrees with dump sha1");
                    }
                }
                Some(hex)
            }
            None => r.sha1.as_deref().and_then(base36_sha1_to_hex),
        };
        self.stats.revisions += 1;
        Ok(RevisionRecord {
            rev_id,
            page_id: page_id.unwrap_or(0),
            timestamp,
            editor,
            username: r.username,
            text: r.text,
            content_hash,
        })
    }
}

impl<R: BufRead> Iterator for DumpReader<R> {
    type Item = Result<PageRecord, DumpError>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        match self.next_page() {
            Ok(Some(p)) => Some(Ok(p)),
            Ok(None) => None,
            Err(e) => {
                self.done = true;
                Some(Err(e))
            }
        }
    }
}

fn attr(start: &BytesStart, key: &[u8]) -> Result<Option<String>, quick_xml::Error> {
    for a in start.attributes() {
        let a = a.map_err(quick_xml::Error::from)?;
        if a.key.local_name().as_ref() == key {
            return Ok(Some(a.unescape_value()?.into_owned()));
        }
    }
    Ok(None)
}

fn parse_num<T: std::str::FromStr>(
    value: &str,
    field: &'static str,
    offset: u64,
) -> Result<T, DumpError> {
    value.trim().parse().map_err(|_| DumpError::InvalidField {
        field,
        value: value.to_owned(),
        offset,
    })
}

fn parse_positive(value: &str, field: &'static str, offset: u64) -> Result<u64, DumpError> {
    match parse_num::<u64>(value, field, offset)? {
        0 => Err(DumpError::InvalidField {
            field,
            value: value.to_owned(),
            offset,
        }),
        v => Ok(v),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::NaiveDate;
    use std::io::Cursor;

    fn revision_xml(id: u64, ts: &str, who: &str, text: &str) -> String {
        format!(
            "<revision><id>{id}</id><timestamp>{ts}</timestamp><contributor>{who}</contributor>\
             <text bytes=\"{}\" xml:space=\"preserve\">{text}</text></revision>",
            text.len()
        )
    }

    fn page_xml(id: u64, ns: i64, revs: &[String]) -> String {
        format!(
            "<page><title>P{id}</title><ns>{ns}</ns><id>{id}</id>{}</page>",
            revs.concat()
        )
    }

    fn wrap(pages: &[String]) -> String {
        format!(
            "<mediawiki xmlns=\"http://www.mediawiki.org/xml/export-0.10/\" version=\"0.10\">\
             <siteinfo><sitename>Wikipedia</sitename></siteinfo>{}</mediawiki>",
            pages.concat()
        )
    }

    fn read_all(xml: &str) -> Vec<Result<PageRecord, DumpError>> {
        DumpReader::new(Cursor::new(xml.as_bytes().to_vec())).collect()
    }

    #[test]
    fn three_pages_in_order() {
        let user = "<username>A</username><id>12</id>";
        let pages: Vec<String> = (1..=3)
            .map(|i| page_xml(i * 10, 0, &[revision_xml(i, "2010-01-01T00:00:00Z", user, "x")]))
            .collect();
        let got: Vec<u64> = read_all(&wrap(&pages))
            .into_iter()
            .map(|p| p.unwrap().page_id)
            .collect();
        assert_eq!(got, [10, 20, 30]);
    }

    #[test]
    fn parses_fields() {
        let revs = vec![
            revision_xml(
                5,
                "2016-10-31T23:59:59Z",
                "<ip>203.0.113.7</ip>",
                "Hello &amp; [[World]]",
            ),
            revision_xml(3, "2016-10-31T23:59:59Z", "<username>Bob</username><id>4528</id>", "a"),
            revision_xml(2, "2016-11-01T00:00:00Z", "<username>Bob</username><id>4528</id>", "b"),
        ];
        let xml = wrap(&[page_xml(7, 0, &revs)]);
        let page = read_all(&xml).remove(0).unwrap();
        assert_eq!(page.title, "P7");
        let ids: Vec<u64> = page.revisions.iter().map(|r| r.rev_id).collect();
        assert_eq!(ids, [3, 5, 2]);
        let r5 = &page.revisions[1];
        assert_eq!(r5.editor, EditorId::Unregistered("203.0.113.7".into()));
        assert_eq!(r5.text.as_deref(), Some("Hello & [[World]]"));
        assert_eq!(r5.page_id, 7);
        // independent oracle for the timestamp: build the instant from its parts
        let expected = NaiveDate::from_ymd_opt(2016, 10, 31)
            .unwrap()
            .and_hms_opt(23, 59, 59)
            .unwrap()
            .and_utc();
        assert_eq!(r5.timestamp, expected);
        assert_eq!(r5.timestamp.timestamp(), 1_477_958_399);
        assert_eq!(page.revisions[0].editor, EditorId::Registered(4528));
        assert_eq!(page.revisions[0].username.as_deref(), Some("Bob"));
    }

    #[test]
    fn page_without_revisions() {
        let xml = wrap(&[page_xml(1, 0, &[])]);
        let page = read_all(&xml).remove(0).unwrap();
        assert!(page.revisions.is_empty());
        assert!(!super::super::keep_page(&page));
    }

    #[test]
    fn suppressed_and_empty_text() {
        let xml = wrap(&[format!(
            "<page><title>X</title><ns>0</ns><id>1</id>\
             <revision><id>1</id><timestamp>2001-01-01T00:00:00Z</timestamp>\
             <contributor deleted=\"deleted\" /><text deleted=\"deleted\" />\
             <sha1>phoiac9h4m842xq45sp7s6u21eteeq1</sha1></revision>\
             <revision><id>2</id><timestamp>2001-01-02T00:00:00Z</timestamp>\
             <contributor><ip>1.2.3.4</ip></contributor><text bytes=\"0\" />\
             <sha1>phoiac9h4m842xq45sp7s6u21eteeq1</sha1></revision></page>"
        )]);
        let mut reader = DumpReader::new(Cursor::new(xml.into_bytes()));
        let page = reader.next().unwrap().unwrap();
        assert_eq!(page.revisions[0].text, None);
        assert_eq!(
            page.revisions[0].content_hash.as_deref(),
            Some("da39a3ee5e6b4b0d3255bfef95601890afd80709")
        );
        assert_eq!(page.revisions[1].text.as_deref(), Some(""));
        assert_eq!(reader.stats().sha1_mismatches, 0);
        assert_eq!(reader.stats().revisions, 2);
    }

    #[test]
    fn sha1_mismatch_is_counted() {
        let xml = wrap(&[format!(
            "<page><title>X</title><ns>0</ns><id>1</id>\
             <revision><id>1</id><timestamp>2001-01-01T00:00:00Z</timestamp>\
             <contributor><ip>1.2.3.4</ip></contributor><text>abc</text>\
             <sha1>phoiac9h4m842xq45sp7s6u21eteeq1</sha1></revision></page>"
        )]);
        let mut reader = DumpReader::new(Cursor::new(xml.into_bytes()));
        reader.next().unwrap().unwrap();
        assert_eq!(reader.stats().sha1_mismatches, 1);
    }

    #[test]
    fn malformed_xml_reports_offset() {
        let xml = "<mediawiki><page><title>x</title></pag></mediawiki>";
        let err = read_all(xml).pop().unwrap().unwrap_err();
        match err {
            DumpError::Xml { offset, .. } => assert!(offset > 0),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn truncated_after_last_complete_page() {
        let user = "<username>A</username><id>12</id>";
        let full = wrap(&[
            page_xml(4, 0, &[revision_xml(1, "2010-01-01T00:00:00Z", user, "x")]),
            page_xml(9, 0, &[revision_xml(2, "2010-01-01T00:00:00Z", user, "y")]),
        ]);
        let cut = &full[..full.rfind("<revision>").unwrap() + 15];
        let results = read_all(cut);
        assert_eq!(results.len(), 2);
        assert_eq!(results[0].as_ref().unwrap().page_id, 4);
        match results[1].as_ref().unwrap_err() {
            DumpError::Truncated { last_complete_page } => {
                assert_eq!(*last_complete_page, Some(4))
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn bad_timestamp() {
        let user = "<username>A</username><id>12</id>";
        let xml = wrap(&[page_xml(1, 0, &[revision_xml(1, "yesterday", user, "x")])]);
        assert!(matches!(
            read_all(&xml).pop().unwrap(),
            Err(DumpError::InvalidField { field: "timestamp", .. })
        ));
    }

    /// Generates a long dump lazily so the test never holds it in memory.
    struct RepeatingDump {
        chunks: std::vec::IntoIter<Vec<u8>>,
        page: Vec<u8>,
        remaining_pages: usize,
        cur: Cursor<Vec<u8>>,
    }

    impl Read for RepeatingDump {
        fn read(&mut self, out: &mut [u8]) -> std::io::Result<usize> {
            loop {
                let n = self.cur.read(out)?;
                if n > 0 {
                    return Ok(n);
                }
                if self.remaining_pages > 0 {
                    self.remaining_pages -= 1;
                    self.cur = Cursor::new(self.page.clone());
                } else if let Some(c) = self.chunks.next() {
                    self.cur = Cursor::new(c);
                } else {
                    return Ok(0);
                }
            }
        }
    }

    #[test]
    fn streaming_buffer_stays_bounded() {
        let user = "<username>A</username><id>12</id>";
        let text = "lorem ipsum dolor sit amet. ".repeat(40);
        let revs: Vec<String> = (1..=20)
            .map(|i| revision_xml(i, "2010-01-01T00:00:00Z", user, &text))
            .collect();
        let page = page_xml(1, 0, &revs).into_bytes();
        let pages = 1000;
        let src = RepeatingDump {
            chunks: vec![b"<mediawiki>".to_vec(), b"</mediawiki>".to_vec()].into_iter(),
            page,
            remaining_pages: 0,
            cur: Cursor::new(Vec::new()),
        };
        let mut src = src;
        // header first, then the repeated pages, then the footer
        src.cur = Cursor::new(src.chunks.next().unwrap());
        src.remaining_pages = pages;
        let mut reader = DumpReader::new(BufReader::new(src));
        let mut count = 0;
        let mut revisions = 0;
        let mut max_cap = 0;
        for p in reader.by_ref() {
            let p = p.unwrap();
            count += 1;
            revisions += p.revisions.len();
            max_cap = max_cap.max(p.revisions.iter().map(|r| r.text.as_ref().unwrap().capacity()).sum());
        }
        assert_eq!(count, pages);
        assert_eq!(revisions, pages * 20);
        assert_eq!(reader.stats().pages, pages as u64);
        // over 20 MB went through; the event buffer never grew past a page
        assert!(reader.buffer_capacity() < 64 * 1024, "{}", reader.buffer_capacity());
        assert!(max_cap < 64 * 1024);
    }
}
