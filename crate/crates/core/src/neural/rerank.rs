use crate::embeddings::EmbeddingTable;
use crate::index::Index;
use crate::retrieval::{RunEntry, RunList};

use super::train::build_matrix;
use super::{AnyRanker, Ranker};

/// Reorders the first `k` entries by `head_scores` (descending, ties by
/// ascending docno) and keeps the rest in place. Head scores are shifted
/// by a constant when needed so that every head score exceeds every tail
/// score.
pub fn reorder_head(candidates: &RunList, head_scores: &[f64], k: usize) -> RunList {
    let k = k.min(candidates.len());
    assert_eq!(head_scores.len(), k, "one score per head candidate");
    let mut head: Vec<(String, f64)> = candidates.entries[..k]
        .iter()
        .zip(head_scores)
        .map(|(e, &s)| (e.docno.clone(), s))
        .collect();
    crate::retrieval::sort_scored(&mut head);

    let tail = &candidates.entries[k..];
    let tail_max = tail.iter().map(|e| e.score).fold(f64::NEG_INFINITY, f64::max);
    let head_min = head.last().map_or(f64::INFINITY, |h| h.1);
    let shift = if !tail.is_empty() && !head.is_empty() && head_min <= tail_max {
        tail_max - head_min + 1.0
    } else {
        0.0
    };

    let mut entries: Vec<RunEntry> = head
        .into_iter()
        .map(|(docno, score)| RunEntry {
            docno,
            rank: 0,
            score: score + shift,
        })
        .collect();
    entries.extend(tail.iter().cloned());
    for (i, e) in entries.iter_mut().enumerate() {
        e.rank = i as u32 + 1;
    }
    RunList {
        qid: candidates.qid.clone(),
        entries,
        tag: candidates.tag.clone(),
    }
}

/// Rescoring of the top `k` candidates with a neural model. Candidates not
/// found in the index are dropped with a warning.
pub fn rerank<S: AsRef<str>>(
    model: &AnyRanker,
    candidates: &RunList,
    query_terms: &[S],
    index: &Index,
    table: &EmbeddingTable,
    k: usize,
) -> RunList {
    let caps = model.caps();
    let mut kept = RunList::new(candidates.qid.clone(), model.kind().name());
    let mut scores = Vec::new();
    let head_len = k.min(candidates.len());
    for (i, e) in candidates.entries.iter().enumerate() {
        if i < head_len {
            match build_matrix(index, table, caps, query_terms, &e.docno) {
                Some(m) => scores.push(model.forward(&m)),
                None => {
                    log::warn!("query {}: candidate {} is not in the index; skipped", candidates.qid, e.docno);
                    continue;
                }
            }
        } else if index.doc_id(&e.docno).is_none() {
            log::warn!("query {}: candidate {} is not in the index; skipped", candidates.qid, e.docno);
            continue;
        }
        kept.entries.push(e.clone());
    }
    let head = scores.len();
    reorder_head(&kept, &scores, head)
}
