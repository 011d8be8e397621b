use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{ModelKind, Params, Ranker, SimMatrix, Tensor};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct PacrrHyper {
    pub lq: usize,
    pub ld: usize,
    pub nf: usize,
    pub kmax: usize,
    pub hidden: usize,
    pub filter_sizes: Vec<usize>,
}

impl Default for PacrrHyper {
    fn default() -> Self {
        Self {
            lq: 16,
            ld: 800,
            nf: 16,
            kmax: 2,
            hidden: 32,
            filter_sizes: vec![2, 3],
        }
    }
}

impl PacrrHyper {
    /// Pooled values plus one IDF slot per query row.
    pub fn row_features(&self) -> usize {
        self.kmax * (1 + self.filter_sizes.len()) + 1
    }

    pub fn input_width(&self) -> usize {
        self.lq * self.row_features()
    }
}

/// Where a pooled value came from, for routing its gradient.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Source {
    /// No parameter dependence (raw cell, zero fill, or an inactive ReLU).
    Constant,
    /// Convolution output at `(row, col)` for filter `f`.
    Conv { row: usize, col: usize, f: usize },
    /// Window entirely inside the column padding: value is `relu(bias[f])`.
    PadBias { f: usize },
}

struct Pooled {
    conv: Vec<Vec<Source>>,
    input: Vec<f64>,
}

/// Position-aware convolutional ranker over a query × document similarity
/// matrix: n×n filters find n-gram matches, row-wise k-max pooling keeps the
/// strongest signals, and a two-layer network combines them with IDF.
///
/// Tensors (with `n` ranging over the filter sizes):
/// `conv{n}_w [nf, n, n]`, `conv{n}_b [nf]`, `dense_w [hidden, input]`,
/// `dense_b [hidden]`, `out_w [hidden]`, `out_b [1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PacrrModel {
    hyper: PacrrHyper,
    params: Params,
}

impl PacrrModel {
    pub fn zeros(hyper: PacrrHyper) -> Self {
        assert!(hyper.lq >= 1 && hyper.ld >= 1 && hyper.nf >= 1 && hyper.kmax >= 1 && hyper.hidden >= 1);
        assert!(hyper.filter_sizes.iter().all(|&n| n >= 1));
        let mut tensors = Vec::new();
        for &n in &hyper.filter_sizes {
            tensors.push(Tensor::zeros(format!("conv{n}_w"), &[hyper.nf, n, n]));
            tensors.push(Tensor::zeros(format!("conv{n}_b"), &[hyper.nf]));
        }
        tensors.push(Tensor::zeros("dense_w", &[hyper.hidden, hyper.input_width()]));
        tensors.push(Tensor::zeros("dense_b", &[hyper.hidden]));
        tensors.push(Tensor::zeros("out_w", &[hyper.hidden]));
        tensors.push(Tensor::zeros("out_b", &[1]));
        Self {
            hyper,
            params: Params { tensors },
        }
    }

    /// Uniform fan-in scaled weights, zero biases.
    pub fn random(hyper: PacrrHyper, seed: u64) -> Self {
        let mut m = Self::zeros(hyper);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for t in &mut m.params.tensors {
            if t.name.ends_with("_b") {
                continue;
            }
            let fan_in: usize = t.shape[1..].iter().product::<usize>().max(1);
            let limit = (3.0 / fan_in as f64).sqrt();
            for x in &mut t.data {
                *x = rng.gen_range(-limit..limit);
            }
        }
        m
    }

    pub fn hyper(&self) -> &PacrrHyper {
        &self.hyper
    }

    fn conv_tensors(&self, path: usize) -> (&[f64], &[f64]) {
        let t = &self.params.tensors;
        (&t[2 * path].data, &t[2 * path + 1].data)
    }

    fn dense_offset(&self) -> usize {
        2 * self.hyper.filter_sizes.len()
    }

    fn pool(&self, m: &SimMatrix) -> Pooled {
        let h = &self.hyper;
        let rows = m.rows().min(h.lq);
        let cols = m.cols().min(h.ld);
        let width = h.row_features();
        let mut input = vec![0.0; h.input_width()];
        let mut conv = Vec::with_capacity(h.filter_sizes.len());

        for i in 0..rows {
            let mut top = TopK::new(h.kmax);
            for j in 0..cols {
                top.offer(m.get(i, j), Source::Constant);
            }
            if h.ld > cols {
                for _ in 0..h.kmax.min(h.ld - cols) {
                    top.offer(0.0, Source::Constant);
                }
            }
            for (k, (v, _)) in top.finish().into_iter().enumerate() {
                input[i * width + k] = v;
            }
            input[i * width + width - 1] = m.query_idf[i];
        }

        for (path, &n) in h.filter_sizes.iter().enumerate() {
            let mut sources = vec![Source::Constant; h.lq * h.kmax];
            if h.lq >= n && h.ld >= n {
                let (w, b) = self.conv_tensors(path);
                let out_cols = h.ld - n + 1;
                let live_cols = cols.min(out_cols);
                let pad_count = out_cols - live_cols;
                let pad_best = best_filter(b.iter().copied());
                for i in 0..rows.min(h.lq - n + 1) {
                    let mut top = TopK::new(h.kmax);
                    for j in 0..live_cols {
                        let acts = (0..h.nf).map(|f| {
                            let kernel = &w[f * n * n..(f + 1) * n * n];
                            let mut s = b[f];
                            for a in 0..n {
                                for c in 0..n {
                                    s += kernel[a * n + c] * m.padded(i + a, j + c);
                                }
                            }
                            s
                        });
                        let (v, src) = match best_filter(acts) {
                            Some((f, v)) => (v, Source::Conv { row: i, col: j, f }),
                            None => (0.0, Source::Constant),
                        };
                        top.offer(v, src);
                    }
                    for _ in 0..h.kmax.min(pad_count) {
                        match pad_best {
                            Some((f, v)) => top.offer(v, Source::PadBias { f }),
                            None => top.offer(0.0, Source::Constant),
                        }
                    }
                    let base = i * width + h.kmax * (path + 1);
                    for (k, (v, src)) in top.finish().into_iter().enumerate() {
                        input[base + k] = v;
                        sources[i * h.kmax + k] = src;
                    }
                }
            }
            conv.push(sources);
        }
        Pooled { conv, input }
    }

    fn hidden(&self, input: &[f64]) -> Vec<f64> {
        let off = self.dense_offset();
        let w = &self.params.tensors[off].data;
        let b = &self.params.tensors[off + 1].data;
        let d = input.len();
        (0..self.hyper.hidden)
            .map(|u| {
                let pre: f64 = w[u * d..(u + 1) * d].iter().zip(input).map(|(a, x)| a * x).sum::<f64>() + b[u];
                pre.max(0.0)
            })
            .collect()
    }

    fn output(&self, hidden: &[f64]) -> f64 {
        let off = self.dense_offset();
        let w = &self.params.tensors[off + 2].data;
        let b = self.params.tensors[off + 3].data[0];
        w.iter().zip(hidden).map(|(a, x)| a * x).sum::<f64>() + b
    }
}

/// Index and value of the strongest positive activation; `None` when every
/// filter is inactive after the ReLU.
fn best_filter(acts: impl Iterator<Item = f64>) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for (f, a) in acts.enumerate() {
        if a > 0.0 && best.map_or(true, |(_, v)| a > v) {
            best = Some((f, a));
        }
    }
    best
}

/// Keeps the `k` largest offered values in descending order; among equal
/// values the earliest offer wins.
struct TopK {
    k: usize,
    items: Vec<(f64, Source)>,
}

impl TopK {
    fn new(k: usize) -> Self {
        Self {
            k,
            items: Vec::with_capacity(k + 1),
        }
    }

    fn offer(&mut self, v: f64, src: Source) {
        if self.items.len() == self.k && v <= self.items[self.k - 1].0 {
            return;
        }
        let at = self.items.iter().position(|&(x, _)| v > x).unwrap_or(self.items.len());
        self.items.insert(at, (v, src));
        self.items.truncate(self.k);
    }

    fn finish(mut self) -> Vec<(f64, Source)> {
        self.items.resize(self.k, (0.0, Source::Constant));
        self.items
    }
}

impl Ranker for PacrrModel {
    fn kind(&self) -> ModelKind {
        ModelKind::Pacrr
    }

    fn params(&self) -> &Params {
        &self.params
    }

    fn params_mut(&mut self) -> &mut Params {
        &mut self.params
    }

    fn forward(&self, m: &SimMatrix) -> f64 {
        let pooled = self.pool(m);
        self.output(&self.hidden(&pooled.input))
    }

    fn accumulate_grad(&self, m: &SimMatrix, upstream: f64, grads: &mut Params) -> f64 {
        let h = &self.hyper;
        let pooled = self.pool(m);
        let input = &pooled.input;
        let hidden = self.hidden(input);
        let score = self.output(&hidden);
        let off = self.dense_offset();
        let d = input.len();

        let out_w = &self.params.tensors[off + 2].data;
        grads.tensors[off + 3].data[0] += upstream;
        let mut d_pre = vec![0.0; h.hidden];
        for u in 0..h.hidden {
            grads.tensors[off + 2].data[u] += upstream * hidden[u];
            if hidden[u] > 0.0 {
                d_pre[u] = upstream * out_w[u];
            }
        }

        let dense_w = &self.params.tensors[off].data;
        let mut d_input = vec![0.0; d];
        for u in 0..h.hidden {
            if d_pre[u] == 0.0 {
                continue;
            }
            grads.tensors[off + 1].data[u] += d_pre[u];
            let gw = &mut grads.tensors[off].data[u * d..(u + 1) * d];
            for (g, x) in gw.iter_mut().zip(input) {
                *g += d_pre[u] * x;
            }
            for (di, w) in d_input.iter_mut().zip(&dense_w[u * d..(u + 1) * d]) {
                *di += d_pre[u] * w;
            }
        }

        let width = h.row_features();
        for (path, &n) in h.filter_sizes.iter().enumerate() {
            for (slot, src) in pooled.conv[path].iter().enumerate() {
                let (i, k) = (slot / h.kmax, slot % h.kmax);
                let g = d_input[i * width + h.kmax * (path + 1) + k];
                match *src {
                    Source::Constant => {}
                    Source::PadBias { f } => grads.tensors[2 * path + 1].data[f] += g,
                    Source::Conv { row, col, f } => {
                        grads.tensors[2 * path + 1].data[f] += g;
                        let gw = &mut grads.tensors[2 * path].data[f * n * n..(f + 1) * n * n];
                        for a in 0..n {
                            for c in 0..n {
                                gw[a * n + c] += g * m.padded(row + a, col + c);
                            }
                        }
                    }
                }
            }
        }
        score
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> PacrrHyper {
        PacrrHyper {
            lq: 6,
            ld: 10,
            nf: 3,
            kmax: 2,
            hidden: 5,
            filter_sizes: vec![2, 3],
        }
    }

    fn randomize(model: &mut PacrrModel, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for t in &mut model.params.tensors {
            for x in &mut t.data {
                *x = rng.gen_range(-0.5..0.5);
            }
        }
    }

    /// Dense nested-loop evaluation on the explicitly padded lq × ld grid.
    fn oracle(model: &PacrrModel, m: &SimMatrix) -> f64 {
        let h = model.hyper();
        let p = model.params();
        let grid: Vec<Vec<f64>> = (0..h.lq)
            .map(|i| (0..h.ld).map(|j| if i < m.rows() && j < m.cols() { m.get(i, j) } else { 0.0 }).collect())
            .collect();
        let kmax_of = |mut v: Vec<f64>| {
            v.sort_by(|a, b| b.partial_cmp(a).unwrap());
            v.resize(h.kmax, 0.0);
            v
        };
        let mut input = Vec::new();
        for i in 0..h.lq {
            let masked = i >= m.rows();
            let mut feats = if masked { vec![0.0; h.kmax] } else { kmax_of(grid[i].clone()) };
            for (path, &n) in h.filter_sizes.iter().enumerate() {
                if masked || i + n > h.lq || n > h.ld {
                    feats.extend(vec![0.0; h.kmax]);
                    continue;
                }
                let w = &p.tensors[2 * path].data;
                let b = &p.tensors[2 * path + 1].data;
                let mut row = Vec::new();
                for j in 0..=h.ld - n {
                    let mut best = 0.0f64;
                    for f in 0..h.nf {
                        let mut s = b[f];
                        for a in 0..n {
                            for c in 0..n {
                                s += w[f * n * n + a * n + c] * grid[i + a][j + c];
                            }
                        }
                        best = best.max(s.max(0.0));
                    }
                    row.push(best);
                }
                feats.extend(kmax_of(row));
            }
            feats.push(if masked { 0.0 } else { m.query_idf[i] });
            input.extend(feats);
        }
        let off = 2 * h.filter_sizes.len();
        let (dw, db, ow, ob) = (&p.tensors[off].data, &p.tensors[off + 1].data, &p.tensors[off + 2].data, p.tensors[off + 3].data[0]);
        let mut score = ob;
        for u in 0..h.hidden {
            let mut z = db[u];
            for (x, xv) in input.iter().enumerate() {
                z += dw[u * input.len() + x] * xv;
            }
            score += ow[u] * z.max(0.0);
        }
        score
    }

    fn random_matrix(rows: usize, cols: usize, seed: u64) -> SimMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cells = (0..rows * cols).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let idf = super::super::softmax(&(0..rows).map(|_| rng.gen_range(0.0..3.0)).collect::<Vec<_>>());
        SimMatrix::from_parts(rows, cols, cells, idf)
    }

    #[test]
    fn zero_input_gives_output_bias() {
        let mut model = PacrrModel::random(PacrrHyper::default(), 1);
        let off = model.dense_offset();
        model.params.tensors[off + 3].data[0] = 0.37;
        let m = SimMatrix::from_parts(3, 5, vec![0.0; 15], vec![0.0; 3]);
        assert_eq!(model.forward(&m), 0.37);
    }

    #[test]
    fn single_cell_fills_unigram_slot_only() {
        let hyper = PacrrHyper {
            lq: 1,
            ld: 1,
            kmax: 1,
            ..PacrrHyper::default()
        };
        let model = PacrrModel::random(hyper, 3);
        let pooled = model.pool(&SimMatrix::from_parts(1, 1, vec![0.42], vec![1.0]));
        assert_eq!(pooled.input, vec![0.42, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn matches_dense_loop_oracle() {
        for seed in 0..5 {
            let mut model = PacrrModel::zeros(small());
            randomize(&mut model, 100 + seed);
            let m = random_matrix(4, 8, seed);
            assert!((model.forward(&m) - oracle(&model, &m)).abs() < 1e-8, "seed {seed}");
        }
    }

    #[test]
    fn oracle_agrees_with_negative_pad_biases() {
        let mut model = PacrrModel::zeros(small());
        randomize(&mut model, 7);
        for b in &mut model.params.tensors[1].data {
            *b = -b.abs();
        }
        let m = random_matrix(2, 3, 9);
        assert!((model.forward(&m) - oracle(&model, &m)).abs() < 1e-8);
    }

    #[test]
    fn filter_larger_than_matrix_contributes_zero() {
        let hyper = PacrrHyper {
            lq: 2,
            ld: 2,
            filter_sizes: vec![3],
            ..small()
        };
        let mut model = PacrrModel::zeros(hyper);
        randomize(&mut model, 4);
        let pooled = model.pool(&random_matrix(2, 2, 1));
        let width = model.hyper().row_features();
        for i in 0..2 {
            assert_eq!(&pooled.input[i * width + 2..i * width + 4], &[0.0, 0.0]);
        }
    }
}
