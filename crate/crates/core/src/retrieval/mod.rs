//! Unsupervised rankers (BM25, Dirichlet query likelihood, SDM), RM3 query
//! expansion, and top-k search over an [`Index`].

mod rm3;
mod run;
mod sdm;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::index::{DocId, Index};

pub use rm3::{relevance_model, rm3_expand};
pub use run::{read_run, write_run, RunEntry, RunError, RunList};
pub(crate) use run::sort_scored;
pub use sdm::{sdm_score, SdmStats};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Bm25Params {
    pub k1: f64,
    pub b: f64,
}

impl Default for Bm25Params {
    fn default() -> Self {
        Self { k1: 0.9, b: 0.4 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QlParams {
    pub mu: f64,
}

impl Default for QlParams {
    fn default() -> Self {
        Self { mu: 1000.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SdmParams {
    pub lambda_t: f64,
    pub lambda_o: f64,
    pub lambda_u: f64,
    pub mu: f64,
    /// Unordered window width.
    pub window: u32,
}

impl Default for SdmParams {
    fn default() -> Self {
        Self {
            lambda_t: 0.85,
            lambda_o: 0.10,
            lambda_u: 0.05,
            mu: 1000.0,
            window: 8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Rm3Params {
    pub fb_docs: usize,
    pub fb_terms: usize,
    pub alpha: f64,
}

impl Default for Rm3Params {
    fn default() -> Self {
        Self {
            fb_docs: 10,
            fb_terms: 10,
            alpha: 0.5,
        }
    }
}

/// All unsupervised-ranker hyperparameters, loadable from a TOML file.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct RetrievalConfig {
    pub bm25: Bm25Params,
    pub ql: QlParams,
    pub sdm: SdmParams,
    pub rm3: Rm3Params,
}

impl RetrievalConfig {
    pub fn from_toml(text: &str) -> Result<Self, toml::de::Error> {
        toml::from_str(text)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QueryOrigin {
    Raw,
    Rm3Expanded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeightedQuery {
    pub terms: Vec<(String, f64)>,
    pub origin: QueryOrigin,
}

impl WeightedQuery {
    /// One entry per query token, each with weight 1.
    pub fn raw<S: Into<String>>(terms: impl IntoIterator<Item = S>) -> Self {
        Self {
            terms: terms.into_iter().map(|t| (t.into(), 1.0)).collect(),
            origin: QueryOrigin::Raw,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn term_list(&self) -> Vec<&str> {
        self.terms.iter().map(|(t, _)| t.as_str()).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Scorer {
    Bm25(Bm25Params),
    Ql(QlParams),
    Sdm(SdmParams),
}

impl Scorer {
    pub fn name(&self) -> &'static str {
        match self {
            Scorer::Bm25(_) => "bm25",
            Scorer::Ql(_) => "ql",
            Scorer::Sdm(_) => "sdm",
        }
    }
}

pub fn bm25_idf(num_docs: usize, df: u32) -> f64 {
    let n = num_docs as f64;
    let df = df as f64;
    (1.0 + (n - df + 0.5) / (df + 0.5)).ln()
}

fn bm25_term(index: &Index, term: &str, doc: DocId, params: Bm25Params) -> f64 {
    let tf = index.tf(term, doc);
    if tf == 0 {
        return 0.0;
    }
    let avgdl = index.avg_doc_len();
    let norm = if avgdl > 0.0 {
        index.doc_len(doc) as f64 / avgdl
    } else {
        1.0
    };
    let tf = tf as f64;
    let tf_part = tf * (params.k1 + 1.0) / (tf + params.k1 * (1.0 - params.b + params.b * norm));
    bm25_idf(index.num_docs(), index.df(term)) * tf_part
}

pub fn bm25_score<S: AsRef<str>>(index: &Index, query_terms: &[S], doc: DocId, k1: f64, b: f64) -> f64 {
    let params = Bm25Params { k1, b };
    query_terms
        .iter()
        .map(|t| bm25_term(index, t.as_ref(), doc, params))
        .sum()
}

/// Collection probability with a one-occurrence floor.
pub(crate) fn collection_prob(count: u64, total_terms: u64) -> f64 {
    count.max(1) as f64 / total_terms.max(1) as f64
}

pub(crate) fn dirichlet_log(count: u32, doc_len: u32, p_collection: f64, mu: f64) -> f64 {
    ((count as f64 + mu * p_collection) / (doc_len as f64 + mu)).ln()
}

/// Dirichlet-smoothed query log-likelihood, weighted per query term.
pub fn ql_score(index: &Index, query: &WeightedQuery, doc: DocId, mu: f64) -> f64 {
    let total = index.total_terms();
    let len = index.doc_len(doc);
    query
        .terms
        .iter()
        .map(|(t, w)| {
            w * dirichlet_log(index.tf(t, doc), len, collection_prob(index.cf(t), total), mu)
        })
        .sum()
}

/// Documents containing at least one positively weighted query term.
pub fn candidates(index: &Index, query: &WeightedQuery) -> Vec<DocId> {
    let mut docs = BTreeSet::new();
    for (t, w) in &query.terms {
        if *w > 0.0 {
            docs.extend(index.postings(t).iter().map(|p| p.doc));
        }
    }
    docs.into_iter().collect()
}

/// Scores every matching document and keeps the best `k`, ties broken by
/// ascending docno. SDM uses the query's term sequence and ignores weights.
pub fn search(index: &Index, qid: &str, query: &WeightedQuery, k: usize, scorer: Scorer) -> RunList {
    assert!(k >= 1, "k must be at least 1");
    if query.is_empty() {
        log::warn!("query {qid} is empty after analysis");
        return RunList::new(qid, scorer.name());
    }
    let docs = candidates(index, query);
    let scored: Vec<(String, f64)> = match scorer {
        Scorer::Bm25(p) => docs
            .iter()
            .map(|&d| {
                let s = query.terms.iter().map(|(t, w)| w * bm25_term(index, t, d, p)).sum();
                (index.docno(d).to_string(), s)
            })
            .collect(),
        Scorer::Ql(p) => docs
            .iter()
            .map(|&d| (index.docno(d).to_string(), ql_score(index, query, d, p.mu)))
            .collect(),
        Scorer::Sdm(p) => {
            let stats = SdmStats::new(index, &query.term_list(), p.window);
            docs.iter()
                .map(|&d| (index.docno(d).to_string(), stats.score(index, d, p)))
                .collect()
        }
    };
    let mut run = RunList::from_scored(qid, scorer.name(), scored);
    run.entries.truncate(k);
    run
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::{Analyzer, Stage};
    use crate::corpus::{Document, Language};

    fn index(docs: &[(&str, &str)]) -> Index {
        let docs: Vec<Document> = docs
            .iter()
            .map(|(n, b)| Document {
                docno: n.to_string(),
                body: b.to_string(),
                language: Language::En,
            })
            .collect();
        let a = Analyzer::with_pipeline(Language::En, Default::default(), vec![Stage::Words, Stage::Normalize]);
        Index::build(&docs, &a).unwrap()
    }

    #[test]
    fn bm25_hand_evaluated() {
        // N=3, df(a)=1, tf=2, |d|=4, avgdl=4
        let idx = index(&[("1", "a a b c"), ("2", "b c d e"), ("3", "c d e f")]);
        let s = bm25_score(&idx, &["a"], 0, 0.9, 0.4);
        let idf = (1.0f64 + 2.5 / 1.5).ln();
        assert!((idf - 0.98083).abs() < 1e-5);
        assert!((s - 1.28522).abs() < 1e-5, "{s}");
        assert_eq!(bm25_score(&idx, &["a"], 1, 0.9, 0.4), 0.0);
    }

    #[test]
    fn bm25_monotone_in_tf() {
        for len in [10usize, 20] {
            let mut prev = 0.0;
            for tf in 1..=10 {
                let body = std::iter::repeat("a")
                    .take(tf)
                    .chain(std::iter::repeat("z").take(len - tf))
                    .collect::<Vec<_>>()
                    .join(" ");
                let idx = index(&[("1", &body), ("2", "z y x"), ("3", "y y")]);
                let s = bm25_score(&idx, &["a"], 0, 0.9, 0.4);
                assert!(s >= prev);
                prev = s;
            }
        }
    }

    #[test]
    fn search_ties_and_depth() {
        let idx = index(&[("B", "x y"), ("A", "x y"), ("C", "q")]);
        let run = search(&idx, "1", &WeightedQuery::raw(["x"]), 10, Scorer::Bm25(Default::default()));
        assert_eq!(run.docnos().collect::<Vec<_>>(), vec!["A", "B"]);
        run.validate().unwrap();
        let run = search(&idx, "1", &WeightedQuery::raw(["x"]), 1, Scorer::Bm25(Default::default()));
        assert_eq!(run.len(), 1);
    }

    #[test]
    fn empty_query_gives_empty_run() {
        let idx = index(&[("A", "x")]);
        let q = WeightedQuery::raw(Vec::<String>::new());
        assert!(search(&idx, "1", &q, 5, Scorer::Ql(Default::default())).is_empty());
    }

    #[test]
    fn config_from_toml_defaults() {
        let cfg = RetrievalConfig::from_toml("[bm25]\nk1 = 1.2\n").unwrap();
        assert_eq!(cfg.bm25.k1, 1.2);
        assert_eq!(cfg.bm25.b, 0.4);
        assert_eq!(cfg.rm3, Rm3Params::default());
        assert_eq!(cfg.sdm.window, 8);
    }
}
