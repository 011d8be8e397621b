//! Token embedding tables: a deterministic mock provider and the EMB1 binary
//! format shared with the export sidecar.
//!
//! EMB1 layout (little-endian):
//!
//! ```text
//! "EMB1" u32:dim u32:count count × (u16:term_len term_utf8 dim × f32)
//! ```

use std::collections::HashMap;
use std::fs::File;
use std::io::{self, BufReader, Read, Write};
use std::path::Path;

use thiserror::Error;

const MAGIC: &[u8; 4] = b"EMB1";

#[derive(Debug, Error)]
pub enum EmbeddingError {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("not an EMB1 file (bad magic)")]
    BadMagic,
    #[error("truncated record at byte {offset}")]
    Truncated { offset: usize },
    #[error("non-finite value for term '{term}' at byte {offset}")]
    NonFinite { term: String, offset: usize },
    #[error("duplicate term '{term}' at byte {offset}")]
    DuplicateTerm { term: String, offset: usize },
    #[error("invalid UTF-8 term at byte {offset}")]
    InvalidTerm { offset: usize },
    #[error("vector for '{term}' has length {got}, table dim is {dim}")]
    DimMismatch { term: String, got: usize, dim: usize },
    #[error("dimension must be at least 2, got {0}")]
    BadDim(usize),
    #[error("term '{0}' is longer than 65535 bytes")]
    TermTooLong(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    Mock,
    File,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    dim: usize,
    terms: Vec<String>,
    vectors: Vec<Vec<f64>>,
    slots: HashMap<String, usize>,
    provenance: Provenance,
}

impl EmbeddingTable {
    pub fn new(dim: usize, provenance: Provenance) -> Self {
        Self {
            dim,
            terms: Vec::new(),
            vectors: Vec::new(),
            slots: HashMap::new(),
            provenance,
        }
    }

    /// Inserts or replaces a vector.
    pub fn insert(&mut self, term: impl Into<String>, vector: Vec<f64>) -> Result<(), EmbeddingError> {
        let term = term.into();
        if vector.len() != self.dim {
            return Err(EmbeddingError::DimMismatch {
                term,
                got: vector.len(),
                dim: self.dim,
            });
        }
        match self.slots.get(&term) {
            Some(&i) => self.vectors[i] = vector,
            None => {
                self.slots.insert(term.clone(), self.terms.len());
                self.terms.push(term);
                self.vectors.push(vector);
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    /// Exact-match lookup; `None` for out-of-vocabulary terms.
    pub fn lookup(&self, term: &str) -> Option<&[f64]> {
        self.slots.get(term).map(|&i| self.vectors[i].as_slice())
    }

    /// Entries in insertion (file) order.
    pub fn iter(&self) -> impl Iterator<Item = (&str, &[f64])> {
        self.terms
            .iter()
            .zip(&self.vectors)
            .map(|(t, v)| (t.as_str(), v.as_slice()))
    }

    pub fn write_emb1<W: Write>(&self, out: W) -> Result<(), EmbeddingError> {
        let mut w = io::BufWriter::new(out);
        w.write_all(MAGIC)?;
        w.write_all(&(self.dim as u32).to_le_bytes())?;
        w.write_all(&(self.terms.len() as u32).to_le_bytes())?;
        for (term, v) in self.iter() {
            let bytes = term.as_bytes();
            let len = u16::try_from(bytes.len()).map_err(|_| EmbeddingError::TermTooLong(term.to_string()))?;
            w.write_all(&len.to_le_bytes())?;
            w.write_all(bytes)?;
            for &x in v {
                w.write_all(&(x as f32).to_le_bytes())?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_emb1<R: Read>(mut input: R) -> Result<Self, EmbeddingError> {
        let mut buf = Vec::new();
        input.read_to_end(&mut buf)?;
        if buf.len() < 4 || &buf[..4] != MAGIC {
            return Err(EmbeddingError::BadMagic);
        }
        let mut pos = 4usize;
        let header = take(&buf, &mut pos, 8).ok_or(EmbeddingError::Truncated { offset: 4 })?;
        let dim = u32::from_le_bytes(header[..4].try_into().unwrap()) as usize;
        let count = u32::from_le_bytes(header[4..].try_into().unwrap()) as usize;
        let mut table = Self::new(dim, Provenance::File);
        for _ in 0..count {
            let record = pos;
            let truncated = EmbeddingError::Truncated { offset: record };
            let len = take(&buf, &mut pos, 2).ok_or(truncated)?;
            let len = u16::from_le_bytes(len.try_into().unwrap()) as usize;
            let term_bytes = take(&buf, &mut pos, len).ok_or(EmbeddingError::Truncated { offset: record })?;
            let term = std::str::from_utf8(term_bytes)
                .map_err(|_| EmbeddingError::InvalidTerm { offset: record + 2 })?
                .to_string();
            let raw = take(&buf, &mut pos, dim * 4).ok_or(EmbeddingError::Truncated { offset: record })?;
            let mut v = Vec::with_capacity(dim);
            for chunk in raw.chunks_exact(4) {
                let x = f32::from_le_bytes(chunk.try_into().unwrap());
                if !x.is_finite() {
                    return Err(EmbeddingError::NonFinite { term, offset: record });
                }
                v.push(x as f64);
            }
            if table.slots.contains_key(&term) {
                return Err(EmbeddingError::DuplicateTerm { term, offset: record });
            }
            table.insert(term, v)?;
        }
        Ok(table)
    }
}

fn take<'a>(buf: &'a [u8], pos: &mut usize, n: usize) -> Option<&'a [u8]> {
    let s = buf.get(*pos..*pos + n)?;
    *pos += n;
    Some(s)
}

pub fn load_embedding_table(path: impl AsRef<Path>) -> Result<EmbeddingTable, EmbeddingError> {
    EmbeddingTable::read_emb1(BufReader::new(File::open(path)?))
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h = 0xcbf2_9ce4_8422_2325u64;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01B3);
    }
    h
}

/// Unit vector derived from `(seed, term)` with a counter-based generator.
/// Only integer arithmetic, division and `sqrt` are involved, so the result
/// is identical on every IEEE-754 platform.
pub fn mock_vector(term: &str, dim: usize, seed: u64) -> Vec<f64> {
    let key = splitmix64(fnv1a64(term.as_bytes()) ^ splitmix64(seed));
    let mut v: Vec<f64> = (0..dim as u64)
        .map(|i| {
            let bits = splitmix64(key ^ splitmix64(i.wrapping_add(1)));
            // 53 random mantissa bits -> [-1, 1)
            (bits >> 11) as f64 / (1u64 << 52) as f64 - 1.0
        })
        .collect();
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
    v
}

pub fn mock_embeddings<S: AsRef<str>>(vocab: &[S], dim: usize, seed: u64) -> Result<EmbeddingTable, EmbeddingError> {
    if dim < 2 {
        return Err(EmbeddingError::BadDim(dim));
    }
    let mut table = EmbeddingTable::new(dim, Provenance::Mock);
    for term in vocab {
        let term = term.as_ref();
        if table.lookup(term).is_none() {
            table.insert(term, mock_vector(term, dim, seed))?;
        }
    }
    Ok(table)
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        (dot / (na * nb)).clamp(-1.0, 1.0)
    }
}
