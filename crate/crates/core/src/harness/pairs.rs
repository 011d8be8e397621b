use std::collections::{BTreeMap, BTreeSet};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::corpus::Qrels;
use crate::neural::{InterleavedPairs, PairStream, TrainPair};
use crate::retrieval::RunList;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairPolicy {
    /// Maximum pairs per query.
    pub cap: usize,
    /// How deep into the BM25 run to look for unjudged fallback negatives.
    pub pool_depth: usize,
}

impl Default for PairPolicy {
    fn default() -> Self {
        Self {
            cap: 16,
            pool_depth: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PairSet {
    pub pairs: Vec<TrainPair>,
    /// Queries that produced no pair (no positives, or no negatives at all).
    pub skipped: Vec<String>,
}

/// Builds `(qid, positive, negative)` training pairs. Positives are judged
/// relevant documents; negatives are judged non-relevant ones, topped up
/// with unjudged documents from the BM25 pool when that gives fewer than
/// `cap` pairs. Queries with more candidate pairs than `cap` keep a seeded
/// random subset, in candidate order.
pub fn make_pairs(
    qrels: &Qrels,
    pools: &BTreeMap<String, RunList>,
    qids: Option<&BTreeSet<String>>,
    policy: PairPolicy,
    seed: u64,
) -> PairSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = PairSet::default();
    for (qid, rels) in qrels {
        if qids.is_some_and(|s| !s.contains(qid)) {
            continue;
        }
        let pos: Vec<&str> = rels.iter().filter(|(_, &g)| g > 0).map(|(d, _)| d.as_str()).collect();
        let mut neg: Vec<&str> = rels.iter().filter(|(_, &g)| g == 0).map(|(d, _)| d.as_str()).collect();
        if pos.len() * neg.len() < policy.cap {
            if let Some(run) = pools.get(qid) {
                neg.extend(run.docnos().take(policy.pool_depth).filter(|d| !rels.contains_key(*d)));
            }
        }
        let mut candidates: Vec<(&str, &str)> = Vec::with_capacity(pos.len() * neg.len());
        for &p in &pos {
            for &n in &neg {
                candidates.push((p, n));
            }
        }
        if candidates.is_empty() {
            out.skipped.push(qid.clone());
            continue;
        }
        if candidates.len() > policy.cap {
            let mut keep = rand::seq::index::sample(&mut rng, candidates.len(), policy.cap).into_vec();
            keep.sort_unstable();
            candidates = keep.into_iter().map(|i| candidates[i]).collect();
        }
        out.pairs.extend(candidates.into_iter().map(|(p, n)| TrainPair::new(qid.clone(), p, n)));
    }
    if !out.skipped.is_empty() {
        log::info!("{} queries produced no training pairs", out.skipped.len());
    }
    out
}

/// One epoch of the few-shot stream: source pairs with the target pairs
/// spread evenly among them. Without target pairs this is the plain source
/// stream.
pub fn interleave_few_shot(source: &[TrainPair], target: &[TrainPair], seed: u64) -> Vec<TrainPair> {
    if target.is_empty() {
        log::warn!("no target-language pairs; few-shot degenerates to zero-shot");
    }
    InterleavedPairs::new(source.to_vec(), target.to_vec(), seed).epoch(1)
}
