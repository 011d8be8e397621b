use crate::index::{DocId, Index, WindowMode};

use super::{collection_prob, dirichlet_log, SdmParams};

/// Per-query collection statistics for the sequential dependence model.
#[derive(Debug, Clone)]
pub struct SdmStats {
    terms: Vec<String>,
    unigram_p: Vec<f64>,
    ordered_p: Vec<f64>,
    unordered_p: Vec<f64>,
    window: u32,
}

impl SdmStats {
    pub fn new<S: AsRef<str>>(index: &Index, query_terms: &[S], window: u32) -> Self {
        let total = index.total_terms();
        let terms: Vec<String> = query_terms.iter().map(|t| t.as_ref().to_string()).collect();
        let unigram_p = terms
            .iter()
            .map(|t| collection_prob(index.cf(t), total))
            .collect();
        let (mut ordered_p, mut unordered_p) = (Vec::new(), Vec::new());
        for pair in terms.windows(2) {
            let key = (pair[0].as_str(), pair[1].as_str());
            ordered_p.push(collection_prob(
                index.collection_window_count(key, WindowMode::OrderedAdjacent),
                total,
            ));
            unordered_p.push(collection_prob(
                index.collection_window_count(key, WindowMode::Unordered(window)),
                total,
            ));
        }
        Self {
            terms,
            unigram_p,
            ordered_p,
            unordered_p,
            window,
        }
    }

    pub fn score(&self, index: &Index, doc: DocId, params: SdmParams) -> f64 {
        debug_assert_eq!(params.window, self.window);
        let len = index.doc_len(doc);
        let mu = params.mu;
        let unigram: f64 = self
            .terms
            .iter()
            .zip(&self.unigram_p)
            .map(|(t, &p)| dirichlet_log(index.tf(t, doc), len, p, mu))
            .sum();
        let mut ordered = 0.0;
        let mut unordered = 0.0;
        for (i, pair) in self.terms.windows(2).enumerate() {
            let key = (pair[0].as_str(), pair[1].as_str());
            let o = index.window_count(doc, key, WindowMode::OrderedAdjacent);
            let u = index.window_count(doc, key, WindowMode::Unordered(self.window));
            ordered += dirichlet_log(o, len, self.ordered_p[i], mu);
            unordered += dirichlet_log(u, len, self.unordered_p[i], mu);
        }
        params.lambda_t * unigram + params.lambda_o * ordered + params.lambda_u * unordered
    }
}

/// Sequential dependence score of one document. A single-term query has no
/// bigram features, leaving only the weighted unigram component.
pub fn sdm_score<S: AsRef<str>>(
    index: &Index,
    query_terms: &[S],
    doc: DocId,
    lambdas: (f64, f64, f64),
    mu: f64,
    window: u32,
) -> f64 {
    let params = SdmParams {
        lambda_t: lambdas.0,
        lambda_o: lambdas.1,
        lambda_u: lambdas.2,
        mu,
        window,
    };
    SdmStats::new(index, query_terms, window).score(index, doc, params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::{Analyzer, Stage};
    use crate::corpus::{Document, Language};
    use crate::retrieval::{ql_score, WeightedQuery};

    fn index(bodies: &[&str]) -> Index {
        let docs: Vec<Document> = bodies
            .iter()
            .enumerate()
            .map(|(i, b)| Document {
                docno: format!("D{i}"),
                body: b.to_string(),
                language: Language::En,
            })
            .collect();
        let a = Analyzer::with_pipeline(Language::En, Default::default(), vec![Stage::Words, Stage::Normalize]);
        Index::build(&docs, &a).unwrap()
    }

    #[test]
    fn single_term_is_unigram_only() {
        let idx = index(&["a b", "a c c"]);
        let mu = 1000.0;
        let s = sdm_score(&idx, &["a"], 1, (0.85, 0.1, 0.05), mu, 8);
        // cf(a)=2, |C|=5, tf=1, |d|=3
        let expect = 0.85 * ((1.0 + mu * 2.0 / 5.0) / (3.0 + mu)).ln();
        assert!((s - expect).abs() < 1e-12);
    }

    #[test]
    fn two_term_hand_evaluation() {
        let idx = index(&["a b", "b x"]);
        let (mu, c) = (10.0f64, 4.0f64);
        // doc 0: tf(a)=1 tf(b)=1 ordered=1 unordered=1; collection: cf(a)=1 cf(b)=2 o=1 u=1
        let ut = ((1.0 + mu * 1.0 / c) / (2.0 + mu)).ln() + ((1.0 + mu * 2.0 / c) / (2.0 + mu)).ln();
        let uo = ((1.0 + mu * 1.0 / c) / (2.0 + mu)).ln();
        let uu = ((1.0 + mu * 1.0 / c) / (2.0 + mu)).ln();
        let expect = 0.85 * ut + 0.10 * uo + 0.05 * uu;
        let got = sdm_score(&idx, &["a", "b"], 0, (0.85, 0.10, 0.05), mu, 8);
        assert!((got - expect).abs() < 1e-9);
        // doc 1 lacks the bigram; the collection floor keeps the log finite
        let got = sdm_score(&idx, &["a", "b"], 1, (0.85, 0.10, 0.05), mu, 8);
        assert!(got.is_finite());
    }

    #[test]
    fn reduces_to_query_likelihood() {
        let idx = index(&["a b c a", "b c", "c c a"]);
        let q = WeightedQuery::raw(["a", "c"]);
        for d in 0..3 {
            let sdm = sdm_score(&idx, &["a", "c"], d, (1.0, 0.0, 0.0), 1000.0, 8);
            assert!((sdm - ql_score(&idx, &q, d, 1000.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn huge_mu_flattens_differences() {
        let idx = index(&["a a a b", "a x y z w", "b b"]);
        let scores: Vec<f64> = (0..3)
            .map(|d| sdm_score(&idx, &["a"], d, (1.0, 0.0, 0.0), 1e9, 8))
            .collect();
        for w in scores.windows(2) {
            assert!((w[0] - w[1]).abs() < 1e-6);
        }
    }
}
