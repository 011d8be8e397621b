use criterion::{black_box, criterion_group, criterion_main, Criterion};

use polyrank_bench::{matrices, world};
use polyrank_core::neural::{backward, KnrmModel, PacrrHyper, PacrrModel, Ranker};

fn knrm(c: &mut Criterion) {
    let w = world(300, 400);
    let ms = matrices(&w, KnrmModel::QUERY_CAP, KnrmModel::DOC_CAP, 64);
    let model = KnrmModel::random(KnrmModel::default_kernels(), 1, 0.5);
    let batch: Vec<_> = ms.chunks(2).filter(|p| p.len() == 2).map(|p| (&p[0], &p[1])).collect();
    c.bench_function("knrm_forward_64", |b| {
        b.iter(|| ms.iter().map(|m| model.forward(black_box(m))).sum::<f64>())
    });
    c.bench_function("knrm_backward_32_pairs", |b| b.iter(|| backward(&model, black_box(&batch)).unwrap()));
}

fn pacrr(c: &mut Criterion) {
    let w = world(300, 400);
    let hyper = PacrrHyper::default();
    let ms = matrices(&w, hyper.lq, hyper.ld, 64);
    let model = PacrrModel::random(hyper, 1);
    let batch: Vec<_> = ms.chunks(2).filter(|p| p.len() == 2).map(|p| (&p[0], &p[1])).collect();
    c.bench_function("pacrr_forward_64", |b| {
        b.iter(|| ms.iter().map(|m| model.forward(black_box(m))).sum::<f64>())
    });
    c.bench_function("pacrr_backward_32_pairs", |b| b.iter(|| backward(&model, black_box(&batch)).unwrap()));
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(20);
    targets = knrm, pacrr
}
criterion_main!(benches);
