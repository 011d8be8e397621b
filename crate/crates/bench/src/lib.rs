//! Shared inputs for the benchmarks: a synthetic corpus and similarity
//! matrices built from it.

use polyrank_core::embeddings::mock_embeddings;
use polyrank_core::harness::{generate_synthetic, SyntheticConfig, SyntheticWorld};
use polyrank_core::neural::sim_matrix;
use polyrank_core::retrieval::bm25_idf;
use polyrank_core::{Analyzer, Index, SimMatrix};

/// A synthetic world whose source collection has roughly `docs` documents
/// of `doc_len` tokens.
pub fn world(docs: usize, doc_len: usize) -> SyntheticWorld {
    let cfg = SyntheticConfig {
        source_queries: 40,
        target_queries: 4,
        few_shot_queries: 2,
        background_docs: docs.saturating_sub(240),
        doc_len,
        filler_words: 4000,
        ..SyntheticConfig::default()
    };
    generate_synthetic(&cfg, 17)
}

pub fn source_index(world: &SyntheticWorld) -> (Index, Analyzer) {
    let analyzer = Analyzer::for_language(world.source.language);
    let index = Index::build(&world.source.docs, &analyzer).expect("generated docnos are unique");
    (index, analyzer)
}

/// One `(query, document)` matrix per document, for the first query.
pub fn matrices(world: &SyntheticWorld, lq: usize, ld: usize, count: usize) -> Vec<SimMatrix> {
    let (index, analyzer) = source_index(world);
    let query = analyzer.terms(&world.source.topics[0].title);
    let table = mock_embeddings(index.vocabulary(), 64, 5).expect("dim is valid");
    index
        .doc_ids()
        .take(count)
        .map(|d| {
            let terms: Vec<&str> = index.doc_terms(d).collect();
            sim_matrix(&query, &terms, &table, lq, ld, |t| bm25_idf(index.num_docs(), index.df(t)))
        })
        .collect()
}
