use std::collections::HashMap;
use std::fmt;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{adam_step, backward, sim_matrix, AdamConfig, AdamState, NeuralError, Ranker, SimMatrix};
use crate::embeddings::EmbeddingTable;
use crate::index::Index;
use crate::retrieval::bm25_idf;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub seed: u64,
    pub pairs_per_query: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            batch_size: 16,
            max_epochs: 50,
            seed: 0,
            pairs_per_query: 16,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), NeuralError> {
        let bad = |m: &str| Err(NeuralError::Config(m.to_string()));
        if !(self.lr > 0.0) {
            return bad("learning rate must be positive");
        }
        if !(self.beta1 > 0.0 && self.beta1 < 1.0 && self.beta2 > 0.0 && self.beta2 < 1.0) {
            return bad("adam betas must lie in (0, 1)");
        }
        if !(self.eps > 0.0) {
            return bad("epsilon must be positive");
        }
        if self.batch_size == 0 || self.max_epochs == 0 || self.pairs_per_query == 0 {
            return bad("batch size, epochs and pairs per query must be at least 1");
        }
        Ok(())
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            lr: self.lr,
            beta1: self.beta1,
            beta2: self.beta2,
            eps: self.eps,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TrainPair {
    pub qid: String,
    pub pos: String,
    pub neg: String,
}

impl TrainPair {
    pub fn new(qid: impl Into<String>, pos: impl Into<String>, neg: impl Into<String>) -> Self {
        Self {
            qid: qid.into(),
            pos: pos.into(),
            neg: neg.into(),
        }
    }
}

/// Supplies the ordered training pairs for each epoch (numbered from 1).
pub trait PairStream {
    fn epoch(&mut self, epoch: usize) -> Vec<TrainPair>;
}

fn epoch_rng(seed: u64, epoch: usize, lane: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(lane);
    rng.set_word_pos(epoch as u128 * (1 << 20));
    rng
}

/// A fixed pair list, reshuffled at the start of every epoch.
#[derive(Debug, Clone)]
pub struct ShuffledPairs {
    pairs: Vec<TrainPair>,
    seed: u64,
}

impl ShuffledPairs {
    pub fn new(pairs: Vec<TrainPair>, seed: u64) -> Self {
        Self { pairs, seed }
    }
}

impl PairStream for ShuffledPairs {
    fn epoch(&mut self, epoch: usize) -> Vec<TrainPair> {
        let mut out = self.pairs.clone();
        out.shuffle(&mut epoch_rng(self.seed, epoch, 0));
        out
    }
}

/// Source-language pairs with a smaller set of target-language pairs spread
/// evenly through each epoch. Each list is shuffled on its own; the slots
/// taken by target pairs are the same every epoch.
#[derive(Debug, Clone)]
pub struct InterleavedPairs {
    source: Vec<TrainPair>,
    target: Vec<TrainPair>,
    seed: u64,
}

impl InterleavedPairs {
    pub fn new(source: Vec<TrainPair>, target: Vec<TrainPair>, seed: u64) -> Self {
        Self { source, target, seed }
    }

    /// Stream positions occupied by target pairs: the `j`-th of `t` target
    /// pairs in a stream of `n` goes to `⌊(j+1)·n/t⌋ − 1`.
    pub fn target_slots(source_len: usize, target_len: usize) -> Vec<usize> {
        let n = source_len + target_len;
        (0..target_len).map(|j| (j + 1) * n / target_len - 1).collect()
    }

    pub fn interleave<T: Clone>(source: &[T], target: &[T]) -> Vec<T> {
        let slots = Self::target_slots(source.len(), target.len());
        let n = source.len() + target.len();
        let (mut s, mut t) = (source.iter(), target.iter());
        let mut next_slot = slots.iter().peekable();
        let mut out = Vec::with_capacity(n);
        for i in 0..n {
            if next_slot.peek() == Some(&&i) {
                next_slot.next();
                out.push(t.next().expect("slot count equals target count").clone());
            } else {
                out.push(s.next().expect("remaining slots belong to source").clone());
            }
        }
        out
    }
}

impl PairStream for InterleavedPairs {
    fn epoch(&mut self, epoch: usize) -> Vec<TrainPair> {
        let mut source = self.source.clone();
        let mut target = self.target.clone();
        source.shuffle(&mut epoch_rng(self.seed, epoch, 0));
        target.shuffle(&mut epoch_rng(self.seed, epoch, 1));
        Self::interleave(&source, &target)
    }
}

/// Similarity matrices for `(qid, docno)` pairs.
pub trait FeatureSource {
    fn matrix(&self, qid: &str, docno: &str) -> Option<&SimMatrix>;
}

/// Precomputed similarity matrices keyed by query and document.
#[derive(Debug, Clone, Default)]
pub struct MatrixCache {
    entries: HashMap<(String, String), SimMatrix>,
}

impl MatrixCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, qid: impl Into<String>, docno: impl Into<String>, m: SimMatrix) {
        self.entries.insert((qid.into(), docno.into()), m);
    }

    /// Builds and stores the matrix for an indexed document, with query row
    /// weights from the index's IDF. Returns `false` when the document is
    /// not in the index.
    pub fn add<S: AsRef<str>>(
        &mut self,
        index: &Index,
        table: &EmbeddingTable,
        caps: (usize, usize),
        qid: &str,
        query_terms: &[S],
        docno: &str,
    ) -> bool {
        if self.entries.contains_key(&(qid.to_string(), docno.to_string())) {
            return true;
        }
        match build_matrix(index, table, caps, query_terms, docno) {
            Some(m) => {
                self.insert(qid, docno, m);
                true
            }
            None => false,
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

impl FeatureSource for MatrixCache {
    fn matrix(&self, qid: &str, docno: &str) -> Option<&SimMatrix> {
        self.entries.get(&(qid.to_string(), docno.to_string()))
    }
}

pub(crate) fn build_matrix<S: AsRef<str>>(
    index: &Index,
    table: &EmbeddingTable,
    (lq, ld): (usize, usize),
    query_terms: &[S],
    docno: &str,
) -> Option<SimMatrix> {
    let doc = index.doc_id(docno)?;
    let doc_terms: Vec<&str> = index.doc_terms(doc).take(ld).collect();
    let n = index.num_docs();
    Some(sim_matrix(query_terms, &doc_terms, table, lq, ld, |t| {
        bm25_idf(n, index.df(t))
    }))
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub loss: f64,
    pub val_ndcg: Option<f64>,
}

impl fmt::Display for EpochRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.val_ndcg {
            Some(v) => write!(f, "{}\t{}\t{}", self.epoch, self.loss, v),
            None => write!(f, "{}\t{}\t-", self.epoch, self.loss),
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome<R> {
    /// Parameters from the best validation epoch.
    pub model: R,
    pub best_epoch: usize,
    pub log: Vec<EpochRecord>,
    /// Pairs dropped because a matrix was unavailable (counted per epoch).
    pub skipped_pairs: usize,
}

/// Trains with mini-batch Adam on the pairwise softmax loss. After every
/// epoch `validate` scores the model (typically nDCG@20 on held-out
/// queries); the snapshot of the first epoch reaching the best score is
/// returned. A validation failure stops training early; if no epoch was
/// validated yet, the latest parameters are returned.
pub fn train<R, V>(
    mut model: R,
    stream: &mut dyn PairStream,
    features: &dyn FeatureSource,
    config: &TrainConfig,
    mut validate: V,
) -> Result<TrainOutcome<R>, NeuralError>
where
    R: Ranker + Clone,
    V: FnMut(&R, usize) -> Result<f64, String>,
{
    config.validate()?;
    let adam = config.adam();
    let mut state = AdamState::new(model.params());
    let mut log = Vec::new();
    let mut best: Option<(f64, usize, R)> = None;
    let mut skipped = 0;

    for epoch in 1..=config.max_epochs {
        let pairs = stream.epoch(epoch);
        let mut usable = Vec::with_capacity(pairs.len());
        for p in &pairs {
            match (features.matrix(&p.qid, &p.pos), features.matrix(&p.qid, &p.neg)) {
                (Some(a), Some(b)) => usable.push((a, b)),
                _ => skipped += 1,
            }
        }
        if usable.is_empty() {
            return Err(NeuralError::NoPairs);
        }
        let mut total = 0.0;
        for batch in usable.chunks(config.batch_size) {
            let (loss, grads) = backward(&model, batch)?;
            adam_step(model.params_mut(), &grads, &mut state, &adam);
            total += loss * batch.len() as f64;
        }
        let loss = total / usable.len() as f64;

        match validate(&model, epoch) {
            Ok(v) => {
                log.push(EpochRecord {
                    epoch,
                    loss,
                    val_ndcg: Some(v),
                });
                if best.as_ref().map_or(true, |(b, _, _)| v > *b) {
                    best = Some((v, epoch, model.clone()));
                }
            }
            Err(e) => {
                log::warn!("validation failed after epoch {epoch}: {e}; stopping");
                log.push(EpochRecord {
                    epoch,
                    loss,
                    val_ndcg: None,
                });
                break;
            }
        }
    }

    let (model, best_epoch) = match best {
        Some((_, e, m)) => (m, e),
        None => (model, log.len()),
    };
    Ok(TrainOutcome {
        model,
        best_epoch,
        log,
        skipped_pairs: skipped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::KnrmModel;

    #[test]
    fn slots_for_four_and_two() {
        assert_eq!(InterleavedPairs::target_slots(4, 2), vec![2, 5]);
        let s = InterleavedPairs::interleave(&["s1", "s2", "s3", "s4"], &["t1", "t2"]);
        assert_eq!(s, vec!["s1", "s2", "t1", "s3", "s4", "t2"]);
        assert_eq!(InterleavedPairs::interleave(&["a", "b"], &[] as &[&str]), vec!["a", "b"]);
    }

    fn toy() -> (Vec<TrainPair>, MatrixCache) {
        let mut cache = MatrixCache::new();
        let mut pairs = Vec::new();
        for q in 0..6 {
            let qid = format!("q{q}");
            let hi = 0.6 + 0.05 * q as f64;
            cache.insert(&qid, "pos", SimMatrix::from_parts(2, 3, vec![hi, 0.1, -0.2, 0.9, hi, 0.0], vec![0.5, 0.5]));
            cache.insert(&qid, "neg", SimMatrix::from_parts(2, 3, vec![-0.5, 0.1, -0.2, 0.05, -0.4, 0.0], vec![0.5, 0.5]));
            pairs.push(TrainPair::new(qid, "pos", "neg"));
        }
        (pairs, cache)
    }

    #[test]
    fn deterministic_and_loss_decreases() {
        let (pairs, cache) = toy();
        let cfg = TrainConfig {
            lr: 0.05,
            batch_size: 2,
            max_epochs: 6,
            seed: 3,
            ..TrainConfig::default()
        };
        let run = || {
            let model = KnrmModel::random(KnrmModel::default_kernels(), 1, 0.01);
            train(model, &mut ShuffledPairs::new(pairs.clone(), 3), &cache, &cfg, |_, e| Ok(e as f64)).unwrap()
        };
        let (a, b) = (run(), run());
        assert_eq!(a.log, b.log);
        assert_eq!(a.model, b.model);
        assert_eq!(a.best_epoch, 6);
        for w in a.log.windows(2).take(5) {
            assert!(w[1].loss < w[0].loss, "{:?}", a.log);
        }
    }

    #[test]
    fn one_epoch_returns_epoch_one() {
        let (pairs, cache) = toy();
        let cfg = TrainConfig {
            max_epochs: 1,
            ..TrainConfig::default()
        };
        let model = KnrmModel::zeros(KnrmModel::default_kernels());
        let out = train(model, &mut ShuffledPairs::new(pairs, 0), &cache, &cfg, |_, _| Ok(0.0)).unwrap();
        assert_eq!(out.best_epoch, 1);
        assert_eq!(out.log.len(), 1);
    }

    #[test]
    fn failing_validation_keeps_best_so_far() {
        let (pairs, cache) = toy();
        let cfg = TrainConfig {
            lr: 0.05,
            max_epochs: 10,
            ..TrainConfig::default()
        };
        let model = KnrmModel::zeros(KnrmModel::default_kernels());
        let out = train(model, &mut ShuffledPairs::new(pairs, 0), &cache, &cfg, |_, e| {
            if e <= 2 {
                Ok(1.0 / e as f64)
            } else {
                Err("boom".into())
            }
        })
        .unwrap();
        assert_eq!(out.best_epoch, 1);
        assert_eq!(out.log.len(), 3);
        assert_eq!(out.log[2].val_ndcg, None);
    }

    #[test]
    fn empty_pairs_and_bad_config() {
        let cache = MatrixCache::new();
        let model = KnrmModel::zeros(KnrmModel::default_kernels());
        let err = train(model.clone(), &mut ShuffledPairs::new(vec![], 0), &cache, &TrainConfig::default(), |_, _| Ok(0.0));
        assert!(matches!(err, Err(NeuralError::NoPairs)));
        let cfg = TrainConfig {
            lr: 0.0,
            ..TrainConfig::default()
        };
        let err = train(model, &mut ShuffledPairs::new(vec![], 0), &cache, &cfg, |_, _| Ok(0.0));
        assert!(matches!(err, Err(NeuralError::Config(_))));
    }
}
