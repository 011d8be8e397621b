//! Ranked result lists and the six-column TREC run format.

use std::collections::HashSet;
use std::io::{self, BufRead, Write};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq)]
pub struct RunEntry {
    pub docno: String,
    pub rank: u32,
    pub score: f64,
}

/// Ranked results for one query.
#[derive(Debug, Clone, PartialEq)]
pub struct RunList {
    pub qid: String,
    pub entries: Vec<RunEntry>,
    pub tag: String,
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("run line {line}: {message}")]
    Line { line: usize, message: String },
    #[error("run for {qid} violates ranking invariants: {message}")]
    Invariant { qid: String, message: String },
}

impl RunList {
    pub fn new(qid: impl Into<String>, tag: impl Into<String>) -> Self {
        Self {
            qid: qid.into(),
            entries: Vec::new(),
            tag: tag.into(),
        }
    }

    /// Builds a list from scored documents: ordered by descending score,
    /// ties by ascending docno, ranks assigned from 1.
    pub fn from_scored(
        qid: impl Into<String>,
        tag: impl Into<String>,
        mut scored: Vec<(String, f64)>,
    ) -> Self {
        sort_scored(&mut scored);
        let entries = scored
            .into_iter()
            .enumerate()
            .map(|(i, (docno, score))| RunEntry {
                docno,
                rank: i as u32 + 1,
                score,
            })
            .collect();
        Self {
            qid: qid.into(),
            entries,
            tag: tag.into(),
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn docnos(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|e| e.docno.as_str())
    }

    pub fn validate(&self) -> Result<(), RunError> {
        let fail = |message: String| RunError::Invariant {
            qid: self.qid.clone(),
            message,
        };
        let mut seen = HashSet::new();
        for (i, e) in self.entries.iter().enumerate() {
            if e.rank != i as u32 + 1 {
                return Err(fail(format!("rank {} at position {}", e.rank, i + 1)));
            }
            if !seen.insert(e.docno.as_str()) {
                return Err(fail(format!("duplicate docno {}", e.docno)));
            }
            if i > 0 && e.score > self.entries[i - 1].score {
                return Err(fail(format!("score increases at rank {}", e.rank)));
            }
        }
        Ok(())
    }
}

pub(crate) fn sort_scored(scored: &mut [(String, f64)]) {
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
}

/// Writes `qid Q0 docno rank score tag` lines. Scores use the shortest
/// representation that parses back to the same value.
pub fn write_run<'a, W: Write, I>(runs: I, mut out: W) -> io::Result<()>
where
    I: IntoIterator<Item = &'a RunList>,
{
    for run in runs {
        for e in &run.entries {
            writeln!(out, "{} Q0 {} {} {} {}", run.qid, e.docno, e.rank, e.score, run.tag)?;
        }
    }
    Ok(())
}

/// Reads a run file, grouping lines by qid in first-seen order and sorting
/// each group by rank.
pub fn read_run<R: BufRead>(reader: R) -> Result<Vec<RunList>, RunError> {
    let mut runs: Vec<RunList> = Vec::new();
    let mut slot: std::collections::HashMap<String, usize> = Default::default();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let err = |message: String| RunError::Line {
            line: i + 1,
            message,
        };
        let f: Vec<&str> = line.split_whitespace().collect();
        if f.len() != 6 {
            return Err(err(format!("expected 6 columns, found {}", f.len())));
        }
        let rank: u32 = f[3].parse().map_err(|_| err(format!("bad rank '{}'", f[3])))?;
        let score: f64 = f[4].parse().map_err(|_| err(format!("bad score '{}'", f[4])))?;
        let idx = *slot.entry(f[0].to_string()).or_insert_with(|| {
            runs.push(RunList::new(f[0], f[5]));
            runs.len() - 1
        });
        runs[idx].entries.push(RunEntry {
            docno: f[2].to_string(),
            rank,
            score,
        });
    }
    for run in &mut runs {
        run.entries.sort_by_key(|e| e.rank);
    }
    Ok(runs)
}
