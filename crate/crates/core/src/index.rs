//! In-memory positional inverted index with collection statistics, plus a
//! single-file snapshot format.
//!
//! Snapshot layout (all fixed-width integers little-endian, `v` = LEB128 varint):
//!
//! ```text
//! header      "PRIX" u32:version u16:lang_len lang v:doc_count v:term_count
//! dictionary  term_count × (v:len bytes v:df v:cf)            sorted by term
//! postings    term_count × df × (v:doc_gap v:tf tf × v:pos_gap)
//! doclens     doc_count × (v:len docno_bytes v:doc_len)       by doc id
//! ```

use std::collections::{BTreeMap, HashMap};
use std::io::{self, Read, Write};

use thiserror::Error;

use crate::analysis::Analyzer;
use crate::corpus::{Document, Language};

pub type DocId = u32;
pub type TermId = u32;

const MAGIC: &[u8; 4] = b"PRIX";
const VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum IndexError {
    #[error("duplicate docno '{0}'")]
    DuplicateDocno(String),
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("snapshot corrupt at byte {offset}: {message}")]
    Format { offset: usize, message: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Posting {
    pub doc: DocId,
    pub tf: u32,
    pub positions: Vec<u32>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WindowMode {
    /// `t2` immediately follows `t1`.
    OrderedAdjacent,
    /// Both terms within `width` positions of each other, in either order.
    Unordered(u32),
}

impl WindowMode {
    pub const UNORDERED_W8: WindowMode = WindowMode::Unordered(8);
}

#[derive(Debug, Clone)]
pub struct Index {
    language: Language,
    terms: Vec<String>,
    term_ids: HashMap<String, TermId>,
    postings: Vec<Vec<Posting>>,
    collection_freq: Vec<u64>,
    docnos: Vec<String>,
    docno_ids: HashMap<String, DocId>,
    doc_lengths: Vec<u32>,
    total_terms: u64,
    /// Forward index: term ids of each document in position order.
    doc_terms: Vec<Vec<TermId>>,
}

const EMPTY: &[Posting] = &[];

impl Index {
    pub fn build(docs: &[Document], analyzer: &Analyzer) -> Result<Self, IndexError> {
        let mut docno_ids = HashMap::with_capacity(docs.len());
        let mut by_term: BTreeMap<String, Vec<Posting>> = BTreeMap::new();
        let mut doc_lengths = Vec::with_capacity(docs.len());
        let mut docnos = Vec::with_capacity(docs.len());
        for (i, doc) in docs.iter().enumerate() {
            let id = i as DocId;
            if docno_ids.insert(doc.docno.clone(), id).is_some() {
                return Err(IndexError::DuplicateDocno(doc.docno.clone()));
            }
            docnos.push(doc.docno.clone());
            let tokens = analyzer.analyze(&doc.body);
            doc_lengths.push(tokens.len() as u32);
            let mut local: BTreeMap<String, Vec<u32>> = BTreeMap::new();
            for t in tokens {
                local.entry(t.term).or_default().push(t.position);
            }
            for (term, positions) in local {
                by_term.entry(term).or_default().push(Posting {
                    doc: id,
                    tf: positions.len() as u32,
                    positions,
                });
            }
        }
        let (terms, postings): (Vec<_>, Vec<_>) = by_term.into_iter().unzip();
        Ok(Self::assemble(analyzer.language(), terms, postings, docnos, doc_lengths))
    }

    fn assemble(
        language: Language,
        terms: Vec<String>,
        postings: Vec<Vec<Posting>>,
        docnos: Vec<String>,
        doc_lengths: Vec<u32>,
    ) -> Self {
        let term_ids = terms
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as TermId))
            .collect();
        let docno_ids = docnos
            .iter()
            .enumerate()
            .map(|(i, d)| (d.clone(), i as DocId))
            .collect();
        let collection_freq: Vec<u64> = postings
            .iter()
            .map(|pl| pl.iter().map(|p| p.tf as u64).sum())
            .collect();
        let total_terms = doc_lengths.iter().map(|&l| l as u64).sum();

        let mut slots: Vec<Vec<(u32, TermId)>> = doc_lengths
            .iter()
            .map(|&l| Vec::with_capacity(l as usize))
            .collect();
        for (tid, pl) in postings.iter().enumerate() {
            for p in pl {
                slots[p.doc as usize].extend(p.positions.iter().map(|&pos| (pos, tid as TermId)));
            }
        }
        let doc_terms = slots
            .into_iter()
            .map(|mut s| {
                s.sort_unstable();
                s.into_iter().map(|(_, t)| t).collect()
            })
            .collect();
        Self {
            language,
            terms,
            term_ids,
            postings,
            collection_freq,
            docnos,
            docno_ids,
            doc_lengths,
            total_terms,
            doc_terms,
        }
    }

    pub fn language(&self) -> Language {
        self.language
    }

    pub fn num_docs(&self) -> usize {
        self.docnos.len()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn total_terms(&self) -> u64 {
        self.total_terms
    }

    pub fn avg_doc_len(&self) -> f64 {
        if self.docnos.is_empty() {
            0.0
        } else {
            self.total_terms as f64 / self.docnos.len() as f64
        }
    }

    pub fn doc_len(&self, doc: DocId) -> u32 {
        self.doc_lengths[doc as usize]
    }

    pub fn docno(&self, doc: DocId) -> &str {
        &self.docnos[doc as usize]
    }

    pub fn doc_id(&self, docno: &str) -> Option<DocId> {
        self.docno_ids.get(docno).copied()
    }

    pub fn term_id(&self, term: &str) -> Option<TermId> {
        self.term_ids.get(term).copied()
    }

    pub fn term(&self, id: TermId) -> &str {
        &self.terms[id as usize]
    }

    /// Dictionary in sorted order.
    pub fn vocabulary(&self) -> &[String] {
        &self.terms
    }

    pub fn postings(&self, term: &str) -> &[Posting] {
        self.term_id(term)
            .map_or(EMPTY, |id| &self.postings[id as usize])
    }

    pub fn postings_by_id(&self, id: TermId) -> &[Posting] {
        &self.postings[id as usize]
    }

    pub fn df(&self, term: &str) -> u32 {
        self.postings(term).len() as u32
    }

    pub fn cf(&self, term: &str) -> u64 {
        self.term_id(term)
            .map_or(0, |id| self.collection_freq[id as usize])
    }

    pub fn posting(&self, term: &str, doc: DocId) -> Option<&Posting> {
        let pl = self.postings(term);
        pl.binary_search_by_key(&doc, |p| p.doc).ok().map(|i| &pl[i])
    }

    pub fn tf(&self, term: &str, doc: DocId) -> u32 {
        self.posting(term, doc).map_or(0, |p| p.tf)
    }

    pub fn doc_term_ids(&self, doc: DocId) -> &[TermId] {
        &self.doc_terms[doc as usize]
    }

    pub fn doc_terms(&self, doc: DocId) -> impl Iterator<Item = &str> + '_ {
        self.doc_terms[doc as usize].iter().map(|&t| self.term(t))
    }

    pub fn doc_ids(&self) -> impl Iterator<Item = DocId> {
        0..self.docnos.len() as DocId
    }

    pub fn window_count(&self, doc: DocId, terms: (&str, &str), mode: WindowMode) -> u32 {
        match (self.posting(terms.0, doc), self.posting(terms.1, doc)) {
            (Some(a), Some(b)) => count_window(&a.positions, &b.positions, terms.0 == terms.1, mode),
            _ => 0,
        }
    }

    /// Window matches summed over the whole collection.
    pub fn collection_window_count(&self, terms: (&str, &str), mode: WindowMode) -> u64 {
        let (a, b) = (self.postings(terms.0), self.postings(terms.1));
        let same = terms.0 == terms.1;
        let (mut i, mut j, mut total) = (0, 0, 0u64);
        while i < a.len() && j < b.len() {
            match a[i].doc.cmp(&b[j].doc) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    total += count_window(&a[i].positions, &b[j].positions, same, mode) as u64;
                    i += 1;
                    j += 1;
                }
            }
        }
        total
    }

    pub fn write_snapshot<W: Write>(&self, w: W) -> Result<(), IndexError> {
        let mut w = io::BufWriter::new(w);
        w.write_all(MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        let lang = self.language.code().as_bytes();
        w.write_all(&(lang.len() as u16).to_le_bytes())?;
        w.write_all(lang)?;
        write_varint(&mut w, self.docnos.len() as u64)?;
        write_varint(&mut w, self.terms.len() as u64)?;
        for (i, term) in self.terms.iter().enumerate() {
            write_bytes(&mut w, term.as_bytes())?;
            write_varint(&mut w, self.postings[i].len() as u64)?;
            write_varint(&mut w, self.collection_freq[i])?;
        }
        for pl in &self.postings {
            let mut prev_doc = 0;
            for p in pl {
                write_varint(&mut w, (p.doc - prev_doc) as u64)?;
                prev_doc = p.doc;
                write_varint(&mut w, p.tf as u64)?;
                let mut prev = 0;
                for &pos in &p.positions {
                    write_varint(&mut w, (pos - prev) as u64)?;
                    prev = pos;
                }
            }
        }
        for (docno, &len) in self.docnos.iter().zip(&self.doc_lengths) {
            write_bytes(&mut w, docno.as_bytes())?;
            write_varint(&mut w, len as u64)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_snapshot<R: Read>(mut r: R) -> Result<Self, IndexError> {
        let mut buf = Vec::new();
        r.read_to_end(&mut buf)?;
        let mut c = Cursor { buf: &buf, pos: 0 };
        if c.take(4)? != MAGIC {
            return Err(c.fail("bad magic"));
        }
        let version = u32::from_le_bytes(c.take(4)?.try_into().unwrap());
        if version != VERSION {
            return Err(c.fail(&format!("unsupported version {version}")));
        }
        let lang_len = u16::from_le_bytes(c.take(2)?.try_into().unwrap()) as usize;
        let lang = c.string(lang_len)?;
        let language = lang.parse().map_err(|_| c.fail("unknown language"))?;
        let n_docs = c.varint()? as usize;
        let n_terms = c.varint()? as usize;
        let mut terms = Vec::with_capacity(n_terms);
        let mut dfs = Vec::with_capacity(n_terms);
        let mut cfs = Vec::with_capacity(n_terms);
        for _ in 0..n_terms {
            let len = c.varint()? as usize;
            terms.push(c.string(len)?);
            dfs.push(c.varint()? as usize);
            cfs.push(c.varint()?);
        }
        let mut postings = Vec::with_capacity(n_terms);
        for (&df, &cf) in dfs.iter().zip(&cfs) {
            let mut pl = Vec::with_capacity(df);
            let mut doc = 0u64;
            for _ in 0..df {
                doc += c.varint()?;
                if doc >= n_docs as u64 {
                    return Err(c.fail("posting references unknown document"));
                }
                let tf = c.varint()? as u32;
                let mut positions = Vec::with_capacity(tf as usize);
                let mut pos = 0u64;
                for _ in 0..tf {
                    pos += c.varint()?;
                    positions.push(pos as u32);
                }
                pl.push(Posting {
                    doc: doc as DocId,
                    tf,
                    positions,
                });
            }
            if pl.iter().map(|p| p.tf as u64).sum::<u64>() != cf {
                return Err(c.fail("collection frequency does not match postings"));
            }
            postings.push(pl);
        }
        let mut docnos = Vec::with_capacity(n_docs);
        let mut doc_lengths = Vec::with_capacity(n_docs);
        for _ in 0..n_docs {
            let len = c.varint()? as usize;
            docnos.push(c.string(len)?);
            doc_lengths.push(c.varint()? as u32);
        }
        if c.pos != buf.len() {
            return Err(c.fail("trailing bytes"));
        }
        Ok(Self::assemble(language, terms, postings, docnos, doc_lengths))
    }
}

fn count_window(a: &[u32], b: &[u32], same_term: bool, mode: WindowMode) -> u32 {
    match mode {
        WindowMode::OrderedAdjacent => {
            let mut j = 0;
            let mut n = 0;
            for &p in a {
                while j < b.len() && b[j] < p + 1 {
                    j += 1;
                }
                if j < b.len() && b[j] == p + 1 {
                    n += 1;
                }
            }
            n
        }
        WindowMode::Unordered(width) => {
            if same_term {
                // unordered pairs of distinct occurrences
                let mut n = 0;
                for (i, &p) in a.iter().enumerate() {
                    n += a[i + 1..].iter().take_while(|&&q| q - p < width).count() as u32;
                }
                n
            } else {
                let mut n = 0;
                let mut lo = 0;
                for &p in a {
                    while lo < b.len() && b[lo] + width <= p {
                        lo += 1;
                    }
                    n += b[lo..].iter().take_while(|&&q| q < p + width).count() as u32;
                }
                n
            }
        }
    }
}

fn write_varint<W: Write>(w: &mut W, mut v: u64) -> io::Result<()> {
    loop {
        let byte = (v & 0x7f) as u8;
        v >>= 7;
        if v == 0 {
            return w.write_all(&[byte]);
        }
        w.write_all(&[byte | 0x80])?;
    }
}

fn write_bytes<W: Write>(w: &mut W, bytes: &[u8]) -> io::Result<()> {
    write_varint(w, bytes.len() as u64)?;
    w.write_all(bytes)
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn fail(&self, message: &str) -> IndexError {
        IndexError::Format {
            offset: self.pos,
            message: message.to_string(),
        }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8], IndexError> {
        if self.pos + n > self.buf.len() {
            return Err(self.fail("unexpected end of snapshot"));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn string(&mut self, n: usize) -> Result<String, IndexError> {
        let start = self.pos;
        let bytes = self.take(n)?;
        String::from_utf8(bytes.to_vec()).map_err(|_| IndexError::Format {
            offset: start,
            message: "invalid UTF-8".to_string(),
        })
    }

    fn varint(&mut self) -> Result<u64, IndexError> {
        let mut v = 0u64;
        for shift in (0..64).step_by(7) {
            let b = self.take(1)?[0];
            v |= ((b & 0x7f) as u64) << shift;
            if b & 0x80 == 0 {
                return Ok(v);
            }
        }
        Err(self.fail("varint too long"))
    }
}
