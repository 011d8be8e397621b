use std::collections::BTreeMap;
use std::path::Path;

use super::HarnessError;
use crate::neural::reorder_head;
use crate::retrieval::RunList;

/// Scores keyed by `(qid, docno)`.
pub type ScoreTable = BTreeMap<(String, String), f64>;

/// Parses `qid docno score` lines (tab or space separated). Blank lines and
/// lines starting with `#` are ignored; a repeated pair is an error.
pub fn parse_score_tsv(text: &str) -> Result<ScoreTable, HarnessError> {
    let mut table = ScoreTable::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let f: Vec<&str> = trimmed.split_whitespace().collect();
        if f.len() != 3 {
            return Err(HarnessError::ScoreLine {
                line: line_no,
                message: format!("expected 3 fields, found {}", f.len()),
            });
        }
        let score: f64 = f[2].parse().map_err(|_| HarnessError::ScoreLine {
            line: line_no,
            message: format!("bad score '{}'", f[2]),
        })?;
        if !score.is_finite() {
            return Err(HarnessError::ScoreLine {
                line: line_no,
                message: "score is not finite".into(),
            });
        }
        let key = (f[0].to_string(), f[1].to_string());
        if table.contains_key(&key) {
            return Err(HarnessError::DuplicateScore {
                qid: key.0,
                docno: key.1,
                line: line_no,
            });
        }
        table.insert(key, score);
    }
    Ok(table)
}

/// Reorders each run's top `k` by external scores, under the same contract
/// as neural reranking. Fails listing every head candidate without a score.
pub fn apply_external_scores(scores: &ScoreTable, candidates: &[RunList], k: usize) -> Result<Vec<RunList>, HarnessError> {
    let mut missing = Vec::new();
    let mut out = Vec::with_capacity(candidates.len());
    for run in candidates {
        let head: Vec<f64> = run
            .entries
            .iter()
            .take(k)
            .filter_map(|e| {
                let key = (run.qid.clone(), e.docno.clone());
                let s = scores.get(&key).copied();
                if s.is_none() {
                    missing.push(key);
                }
                s
            })
            .collect();
        if missing.is_empty() {
            let mut r = reorder_head(run, &head, k);
            r.tag = "external".into();
            out.push(r);
        }
    }
    if !missing.is_empty() {
        return Err(HarnessError::MissingScores(missing));
    }
    Ok(out)
}

pub fn ingest_external_scores(path: &Path, candidates: &[RunList], k: usize) -> Result<Vec<RunList>, HarnessError> {
    let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
    apply_external_scores(&parse_score_tsv(&text)?, candidates, k)
}
