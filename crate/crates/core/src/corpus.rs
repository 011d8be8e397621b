//! Readers for TREC-style collections: SGML documents, topic files and qrels.
//!
//! All three parsers are tolerant: malformed records are reported alongside
//! the successfully parsed ones instead of aborting the whole stream.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::io::{self, Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("input is not valid UTF-8 at byte {offset}; convert legacy encodings before parsing")]
    Encoding { offset: usize },
    #[error("unclosed <DOC> block starting at byte {offset}")]
    UnclosedDoc { offset: usize },
    #[error("unclosed <top> block starting at byte {offset}")]
    UnclosedTopic { offset: usize },
    #[error("unknown language '{0}'")]
    UnknownLanguage(String),
    #[error("collection config line {line}: {message}")]
    Config { line: usize, message: String },
}

/// Languages with a dedicated analysis pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Language {
    En,
    Ar,
    Zh,
    Es,
}

impl Language {
    pub fn code(self) -> &'static str {
        match self {
            Language::En => "en",
            Language::Ar => "ar",
            Language::Zh => "zh",
            Language::Es => "es",
        }
    }
}

impl fmt::Display for Language {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for Language {
    type Err = CorpusError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "en" | "english" => Ok(Language::En),
            "ar" | "arabic" => Ok(Language::Ar),
            "zh" | "mandarin" | "chinese" => Ok(Language::Zh),
            "es" | "spanish" => Ok(Language::Es),
            other => Err(CorpusError::UnknownLanguage(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Document {
    pub docno: String,
    pub body: String,
    pub language: Language,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Topic {
    pub qid: String,
    pub title: String,
    pub description: String,
    pub language: Language,
}

/// Which topic field supplies the query text.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TopicField {
    #[default]
    Title,
    Description,
}

impl FromStr for TopicField {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "title" => Ok(TopicField::Title),
            "desc" | "description" => Ok(TopicField::Description),
            other => Err(format!("unknown topic field '{other}'")),
        }
    }
}

impl Topic {
    pub fn text(&self, field: TopicField) -> &str {
        match field {
            TopicField::Title => &self.title,
            TopicField::Description => &self.description,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QrelEntry {
    pub qid: String,
    pub docno: String,
    pub relevance: u32,
}

/// qid → docno → graded relevance.
pub type Qrels = BTreeMap<String, BTreeMap<String, u32>>;

/// A record that could not be turned into a value. `location` is a byte
/// offset for SGML inputs and a 1-based line number for qrels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RecordError {
    pub location: usize,
    pub message: String,
}

#[derive(Debug, Clone, Default)]
pub struct Parsed<T> {
    pub records: T,
    pub errors: Vec<RecordError>,
    pub warnings: Vec<String>,
}

fn read_utf8<R: Read>(mut stream: R) -> Result<String, CorpusError> {
    let mut bytes = Vec::new();
    stream.read_to_end(&mut bytes)?;
    String::from_utf8(bytes).map_err(|e| CorpusError::Encoding {
        offset: e.utf8_error().valid_up_to(),
    })
}

fn unescape(s: &str) -> String {
    if !s.contains('&') {
        return s.to_string();
    }
    s.replace("&lt;", "<").replace("&gt;", ">").replace("&amp;", "&")
}

/// A tag occurrence inside an SGML-ish text.
#[derive(Debug)]
struct Tag<'a> {
    start: usize,
    end: usize,
    name: &'a str,
    closing: bool,
}

fn next_tag(text: &str, from: usize) -> Option<Tag<'_>> {
    let mut pos = from;
    loop {
        let open = pos + text[pos..].find('<')?;
        let close = open + text[open..].find('>')?;
        let inner = text[open + 1..close].trim();
        let (closing, inner) = match inner.strip_prefix('/') {
            Some(rest) => (true, rest.trim_start()),
            None => (false, inner),
        };
        let name_end = inner
            .find(|c: char| c.is_whitespace())
            .unwrap_or(inner.len());
        let name = &inner[..name_end];
        if name.is_empty() || name.starts_with('!') || name.starts_with('?') {
            pos = close + 1;
            continue;
        }
        return Some(Tag {
            start: open,
            end: close + 1,
            name,
            closing,
        });
    }
}

fn find_tag<'a>(text: &'a str, from: usize, name: &str, closing: bool) -> Option<Tag<'a>> {
    let mut pos = from;
    while let Some(tag) = next_tag(text, pos) {
        if tag.closing == closing && tag.name.eq_ignore_ascii_case(name) {
            return Some(tag);
        }
        pos = tag.end;
    }
    None
}

fn normalize_ws(parts: &[String]) -> String {
    let mut out = String::new();
    for word in parts.iter().flat_map(|p| p.split_whitespace()) {
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(word);
    }
    out
}

/// Parses `<DOC>` blocks. The body is the whitespace-joined text of every
/// configured content tag (matched case-insensitively), including the text of
/// any unknown tags nested inside them.
pub fn parse_trec_docs<R: Read>(
    stream: R,
    content_tags: &[String],
    language: Language,
) -> Result<Parsed<Vec<Document>>, CorpusError> {
    let text = read_utf8(stream)?;
    parse_trec_docs_str(&text, content_tags, language)
}

pub fn parse_trec_docs_str(
    text: &str,
    content_tags: &[String],
    language: Language,
) -> Result<Parsed<Vec<Document>>, CorpusError> {
    let mut out = Parsed::<Vec<Document>>::default();
    let mut seen = HashSet::new();
    let mut pos = 0;
    while let Some(open) = find_tag(text, pos, "DOC", false) {
        let close = find_tag(text, open.end, "DOC", true)
            .ok_or(CorpusError::UnclosedDoc { offset: open.start })?;
        let block = &text[open.end..close.start];
        match parse_doc_block(block, content_tags) {
            Some((docno, body)) => {
                if !seen.insert(docno.clone()) {
                    out.warnings.push(format!(
                        "duplicate DOCNO '{docno}' at byte {}",
                        open.start
                    ));
                }
                out.records.push(Document {
                    docno,
                    body,
                    language,
                });
            }
            None => out.errors.push(RecordError {
                location: open.start,
                message: "document block has no DOCNO".to_string(),
            }),
        }
        pos = close.end;
    }
    Ok(out)
}

fn parse_doc_block(block: &str, content_tags: &[String]) -> Option<(String, String)> {
    let mut docno = None;
    let mut parts = Vec::new();
    // depth inside configured content tags; text is kept while depth > 0
    let mut depth = 0usize;
    let mut pos = 0;
    while let Some(tag) = next_tag(block, pos) {
        if depth > 0 && tag.start > pos {
            parts.push(unescape(&block[pos..tag.start]));
        }
        if tag.name.eq_ignore_ascii_case("DOCNO") && !tag.closing {
            let end = find_tag(block, tag.end, "DOCNO", true);
            let value_end = end.as_ref().map_or(block.len(), |t| t.start);
            let value = unescape(block[tag.end..value_end].trim());
            if !value.is_empty() && docno.is_none() {
                docno = Some(value);
            }
            pos = end.map_or(block.len(), |t| t.end);
            continue;
        }
        if content_tags.iter().any(|t| t.eq_ignore_ascii_case(tag.name)) {
            if tag.closing {
                depth = depth.saturating_sub(1);
            } else {
                depth += 1;
            }
        }
        pos = tag.end;
    }
    if depth > 0 && pos < block.len() {
        parts.push(unescape(&block[pos..]));
    }
    docno.map(|d| (d, normalize_ws(&parts)))
}

#[derive(Debug, Clone, Default)]
pub struct TopicParse {
    pub topics: Vec<Topic>,
    /// qids whose requested field came out empty.
    pub empty_field: Vec<String>,
}

const TOPIC_LABELS: &[&str] = &["Number:", "Description:", "Narrative:", "Title:", "Topic:"];

fn strip_label(s: &str) -> &str {
    let s = s.trim();
    for label in TOPIC_LABELS {
        if s.len() >= label.len() && s[..label.len()].eq_ignore_ascii_case(label) {
            return s[label.len()..].trim();
        }
    }
    s
}

fn field_matches(tag: &str, field: &str) -> bool {
    tag.eq_ignore_ascii_case(field)
        || (tag.len() > field.len() + 1
            && tag.as_bytes()[tag.len() - field.len() - 1] == b'-'
            && tag[tag.len() - field.len()..].eq_ignore_ascii_case(field))
}

/// Parses `<top>` blocks. Fields may be closed explicitly or run until the
/// next tag, as in classic TREC topic files.
pub fn parse_topics<R: Read>(
    stream: R,
    field: TopicField,
    language: Language,
) -> Result<Parsed<TopicParse>, CorpusError> {
    let text = read_utf8(stream)?;
    parse_topics_str(&text, field, language)
}

pub fn parse_topics_str(
    text: &str,
    field: TopicField,
    language: Language,
) -> Result<Parsed<TopicParse>, CorpusError> {
    let mut out = Parsed::<TopicParse>::default();
    let mut pos = 0;
    while let Some(open) = find_tag(text, pos, "top", false) {
        let close = find_tag(text, open.end, "top", true)
            .ok_or(CorpusError::UnclosedTopic { offset: open.start })?;
        let block = &text[open.end..close.start];
        let mut qid = None;
        let mut title = String::new();
        let mut description = String::new();
        let mut cur = 0;
        while let Some(tag) = next_tag(block, cur) {
            cur = tag.end;
            if tag.closing {
                continue;
            }
            let value_end = next_tag(block, tag.end).map_or(block.len(), |t| t.start);
            let value = normalize_ws(&[unescape(strip_label(&block[tag.end..value_end]))]);
            if field_matches(tag.name, "num") {
                if qid.is_none() && !value.is_empty() {
                    qid = Some(value);
                }
            } else if field_matches(tag.name, "title") {
                if title.is_empty() {
                    title = value;
                }
            } else if field_matches(tag.name, "desc") && description.is_empty() {
                description = value;
            }
        }
        match qid {
            None => out.errors.push(RecordError {
                location: open.start,
                message: "topic block has no <num>".to_string(),
            }),
            Some(_) if title.is_empty() && description.is_empty() => {
                out.errors.push(RecordError {
                    location: open.start,
                    message: "topic has neither title nor description".to_string(),
                })
            }
            Some(qid) => {
                let topic = Topic {
                    qid,
                    title,
                    description,
                    language,
                };
                if topic.text(field).is_empty() {
                    out.warnings
                        .push(format!("topic {} has an empty {:?} field", topic.qid, field));
                    out.records.empty_field.push(topic.qid.clone());
                }
                out.records.topics.push(topic);
            }
        }
        pos = close.end;
    }
    Ok(out)
}

/// Parses `qid iter docno rel` lines. Later duplicates overwrite earlier ones.
pub fn parse_qrels<R: Read>(stream: R) -> Result<Parsed<Qrels>, CorpusError> {
    let text = read_utf8(stream)?;
    Ok(parse_qrels_str(&text))
}

pub fn parse_qrels_str(text: &str) -> Parsed<Qrels> {
    let mut out = Parsed::<Qrels>::default();
    for (i, line) in text.lines().enumerate() {
        let lineno = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 4 {
            out.errors.push(RecordError {
                location: lineno,
                message: format!("expected 4 fields, found {}", fields.len()),
            });
            continue;
        }
        let rel: u32 = match fields[3].parse() {
            Ok(r) => r,
            Err(_) => {
                out.errors.push(RecordError {
                    location: lineno,
                    message: format!("relevance '{}' is not a non-negative integer", fields[3]),
                });
                continue;
            }
        };
        let prev = out
            .records
            .entry(fields[0].to_string())
            .or_default()
            .insert(fields[2].to_string(), rel);
        if prev.is_some() {
            out.warnings.push(format!(
                "line {lineno}: duplicate judgment for ({}, {}); keeping last",
                fields[0], fields[2]
            ));
        }
    }
    out
}

pub fn write_qrels<W: Write>(qrels: &Qrels, mut out: W) -> io::Result<()> {
    for (qid, docs) in qrels {
        for (docno, rel) in docs {
            writeln!(out, "{qid} 0 {docno} {rel}")?;
        }
    }
    Ok(())
}

pub fn qrel_entries(qrels: &Qrels) -> impl Iterator<Item = QrelEntry> + '_ {
    qrels.iter().flat_map(|(qid, docs)| {
        docs.iter().map(move |(docno, rel)| QrelEntry {
            qid: qid.clone(),
            docno: docno.clone(),
            relevance: *rel,
        })
    })
}

/// Per-collection settings read from a `key = value` text file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CollectionConfig {
    pub language: Language,
    pub content_tags: Vec<String>,
    pub encoding: String,
}

impl CollectionConfig {
    pub const DEFAULT_TAGS: &'static [&'static str] = &["TEXT", "HEADLINE", "LEADPARA", "TITLE"];

    pub fn new(language: Language) -> Self {
        Self {
            language,
            content_tags: Self::DEFAULT_TAGS.iter().map(|s| s.to_string()).collect(),
            encoding: "utf-8".to_string(),
        }
    }

    pub fn parse(text: &str) -> Result<Self, CorpusError> {
        let mut language = None;
        let mut tags = None;
        let mut encoding = "utf-8".to_string();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |message: String| CorpusError::Config {
                line: i + 1,
                message,
            };
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| err("expected key = value".to_string()))?;
            let value = value.trim();
            match key.trim() {
                "language" => language = Some(value.parse()?),
                "tags" => {
                    tags = Some(
                        value
                            .split(',')
                            .map(|t| t.trim().to_string())
                            .filter(|t| !t.is_empty())
                            .collect::<Vec<_>>(),
                    )
                }
                "encoding" => {
                    let enc = value.to_ascii_lowercase();
                    if enc != "utf-8" && enc != "utf8" {
                        return Err(err(format!(
                            "encoding '{value}' is not decoded in-process; convert the files to UTF-8 first"
                        )));
                    }
                    encoding = "utf-8".to_string();
                }
                other => return Err(err(format!("unknown key '{other}'"))),
            }
        }
        let language = language.ok_or(CorpusError::Config {
            line: 0,
            message: "missing 'language'".to_string(),
        })?;
        let mut cfg = Self::new(language);
        if let Some(tags) = tags {
            cfg.content_tags = tags;
        }
        cfg.encoding = encoding;
        Ok(cfg)
    }
}
