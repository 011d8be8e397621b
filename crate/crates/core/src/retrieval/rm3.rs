use std::collections::BTreeMap;

use crate::analysis::stopwords;
use crate::index::Index;

use super::{search, Bm25Params, QueryOrigin, Rm3Params, Scorer, WeightedQuery};

/// Relevance model over the top `fb_docs` BM25 documents, each weighted by
/// a softmax over the feedback scores. Returns terms
/// sorted by descending probability (ties by term), or `None` when nothing was
/// retrieved.
pub fn relevance_model(
    index: &Index,
    query: &WeightedQuery,
    fb_docs: usize,
    bm25: Bm25Params,
) -> Option<Vec<(String, f64)>> {
    let feedback = search(index, "rm3", query, fb_docs.max(1), Scorer::Bm25(bm25));
    if feedback.is_empty() {
        return None;
    }
    let max = feedback.entries[0].score;
    let exps: Vec<f64> = feedback.entries.iter().map(|e| (e.score - max).exp()).collect();
    let z: f64 = exps.iter().sum();
    let stop = stopwords(index.language());

    let mut model: BTreeMap<&str, f64> = BTreeMap::new();
    for (e, w) in feedback.entries.iter().zip(&exps) {
        let doc = index.doc_id(&e.docno).expect("feedback doc is indexed");
        let len = index.doc_len(doc);
        if len == 0 {
            continue;
        }
        let weight = w / z;
        for &tid in index.doc_term_ids(doc) {
            let term = index.term(tid);
            if stop.contains(term) {
                continue;
            }
            // each occurrence adds weight/|d|, so the sum is weight·tf/|d|
            *model.entry(term).or_default() += weight / len as f64;
        }
    }
    let total: f64 = model.values().sum();
    if total <= 0.0 {
        return None;
    }
    let mut ranked: Vec<(String, f64)> = model
        .into_iter()
        .map(|(t, p)| (t.to_string(), p / total))
        .collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    Some(ranked)
}

/// RM3: interpolates the normalized original query with the top `fb_terms`
/// relevance-model terms, `alpha` weighting the original side.
pub fn rm3_expand(index: &Index, query: &WeightedQuery, params: Rm3Params, bm25: Bm25Params) -> WeightedQuery {
    assert!((0.0..=1.0).contains(&params.alpha), "alpha must lie in [0, 1]");
    let Some(mut model) = relevance_model(index, query, params.fb_docs, bm25) else {
        log::warn!("RM3: no feedback documents retrieved; keeping the original query");
        return query.clone();
    };
    model.truncate(params.fb_terms.max(1));
    let kept: f64 = model.iter().map(|(_, p)| p).sum();

    let mut original: BTreeMap<String, f64> = BTreeMap::new();
    for (t, w) in &query.terms {
        *original.entry(t.clone()).or_default() += w;
    }
    let orig_total: f64 = original.values().sum();

    let mut mixed: BTreeMap<String, f64> = BTreeMap::new();
    if orig_total > 0.0 {
        for (t, w) in original {
            *mixed.entry(t).or_default() += params.alpha * w / orig_total;
        }
    }
    for (t, p) in model {
        *mixed.entry(t).or_default() += (1.0 - params.alpha) * p / kept;
    }
    let z: f64 = mixed.values().sum();
    let mut terms: Vec<(String, f64)> = mixed.into_iter().map(|(t, w)| (t, w / z)).collect();
    terms.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    WeightedQuery {
        terms,
        origin: QueryOrigin::Rm3Expanded,
    }
}
