use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};

use polyrank_bench::{source_index, world};
use polyrank_core::retrieval::{search, Bm25Params, QlParams, SdmParams};
use polyrank_core::{Index, Scorer, WeightedQuery};

fn index_build(c: &mut Criterion) {
    let mut group = c.benchmark_group("index_build");
    group.sample_size(20);
    for docs in [500, 2000] {
        let w = world(docs, 120);
        let analyzer = polyrank_core::Analyzer::for_language(w.source.language);
        group.bench_with_input(BenchmarkId::from_parameter(docs), &w.source.docs, |b, d| {
            b.iter(|| Index::build(black_box(d), &analyzer).unwrap())
        });
    }
    group.finish();
}

fn ranking(c: &mut Criterion) {
    let w = world(2000, 120);
    let (index, analyzer) = source_index(&w);
    let queries: Vec<WeightedQuery> = w
        .source
        .topics
        .iter()
        .map(|t| WeightedQuery::raw(analyzer.terms(&t.title)))
        .collect();
    let mut group = c.benchmark_group("search_1000");
    for scorer in [
        Scorer::Bm25(Bm25Params::default()),
        Scorer::Ql(QlParams::default()),
        Scorer::Sdm(SdmParams::default()),
    ] {
        group.bench_function(scorer.name(), |b| {
            b.iter(|| {
                for q in &queries {
                    black_box(search(&index, "q", q, 1000, scorer));
                }
            })
        });
    }
    group.finish();
}

criterion_group!(benches, index_build, ranking);
criterion_main!(benches);
