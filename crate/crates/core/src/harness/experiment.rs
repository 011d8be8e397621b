use std::borrow::Cow;
use std::collections::{BTreeMap, BTreeSet};
use std::rc::Rc;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use super::collection::{AccessLog, Collection, Phase};
use super::external::ingest_external_scores;
use super::pairs::{make_pairs, PairPolicy};
use super::report::{Report, Significance, SystemResult};
use super::spec::{Baseline, EmbeddingKind, ExperimentSpec, Mode, ModelChoice};
use super::synthetic::{generate, SyntheticWorld};
use super::HarnessError;
use crate::embeddings::{load_embedding_table, mock_embeddings, EmbeddingTable};
use crate::eval::{compare_reports, evaluate, Metric};
use crate::index::Index;
use crate::neural::{
    rerank, reorder_head, train, AnyRanker, FeatureSource, InterleavedPairs, KnrmModel, MatrixCache, PacrrModel, PairStream, Ranker,
    ShuffledPairs, TrainOutcome, TrainPair,
};
use crate::retrieval::{search, RetrievalConfig, RunList, Scorer, WeightedQuery};

const VALIDATION_METRIC: Metric = Metric::NdcgAt(20);

/// Runs the experiment described by `spec` with a private access log.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<Report, HarnessError> {
    match spec.mode {
        Mode::ZeroShot => run_zero_shot(spec, AccessLog::new()),
        Mode::FewShot => run_few_shot(spec, AccessLog::new()),
        Mode::Oracle => run_oracle(spec, AccessLog::new()),
    }
}

/// Trains on the source collection only, then tests on the target. The
/// target is not opened before the testing phase begins.
pub fn run_zero_shot(spec: &ExperimentSpec, log: Rc<AccessLog>) -> Result<Report, HarnessError> {
    Experiment::new(spec, log)?.run(Mode::ZeroShot)
}

/// Zero-shot training with pairs from a target-language companion
/// collection spread through every epoch.
pub fn run_few_shot(spec: &ExperimentSpec, log: Rc<AccessLog>) -> Result<Report, HarnessError> {
    Experiment::new(spec, log)?.run(Mode::FewShot)
}

/// Trains and validates on folds of the test collection itself. Reported
/// numbers are an upper bound, never a zero-shot result.
pub fn run_oracle(spec: &ExperimentSpec, log: Rc<AccessLog>) -> Result<Report, HarnessError> {
    Experiment::new(spec, log)?.run(Mode::Oracle)
}

/// Runs only the training phase of `spec`; the test collection is never
/// opened (except in oracle mode, where it is the training collection).
pub fn train_from_spec(spec: &ExperimentSpec) -> Result<TrainOutcome<AnyRanker>, HarnessError> {
    if spec.model == ModelChoice::ExternalScores {
        return Err(HarnessError::Spec("external_scores models are not trained".into()));
    }
    Ok(Experiment::new(spec, AccessLog::new())?.train_phase(spec.mode)?.outcome)
}

/// The top `k` of a run in a seeded random order that depends only on the
/// seed and the qid.
pub fn shuffled_head(run: &RunList, k: usize, seed: u64) -> RunList {
    let digest = Sha256::digest(run.qid.as_bytes());
    let salt = u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"));
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ salt);
    let head = k.min(run.len());
    let mut order: Vec<f64> = (0..head).map(|i| i as f64).collect();
    order.shuffle(&mut rng);
    let mut r = reorder_head(run, &order, head);
    r.tag = "shuffled".into();
    r
}

enum Embeddings {
    Mock { dim: usize, seed: u64 },
    Table(EmbeddingTable),
}

struct Experiment<'s> {
    spec: &'s ExperimentSpec,
    log: Rc<AccessLog>,
    source: Option<Collection>,
    target: Collection,
    companion: Option<Collection>,
    embeddings: Embeddings,
    extra_checksums: BTreeMap<String, String>,
}

/// An opened collection with its embedding table.
struct Side<'a> {
    coll: &'a Collection,
    index: &'a Index,
    queries: &'a BTreeMap<String, Vec<String>>,
    table: Cow<'a, EmbeddingTable>,
}

impl Side<'_> {
    fn key(&self, qid: &str) -> String {
        format!("{}:{qid}", self.coll.name())
    }

    fn bm25(&self, qids: Option<&BTreeSet<String>>, depth: usize, cfg: &RetrievalConfig) -> BTreeMap<String, RunList> {
        self.queries
            .iter()
            .filter(|(q, _)| qids.map_or(true, |s| s.contains(*q)))
            .map(|(qid, terms)| {
                if terms.is_empty() {
                    log::warn!("{}: query {qid} is empty after analysis", self.coll.name());
                }
                let run = search(self.index, qid, &WeightedQuery::raw(terms.iter().cloned()), depth, Scorer::Bm25(cfg.bm25));
                (qid.clone(), run)
            })
            .collect()
    }
}

/// Deterministic train/validation split for collections without folds.
fn split_folds(mut qids: Vec<String>, fraction: f64, seed: u64) -> (BTreeSet<String>, BTreeSet<String>) {
    qids.sort();
    qids.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_val = if qids.len() < 2 {
        0
    } else {
        ((qids.len() as f64 * fraction).round() as usize).clamp(1, qids.len() - 1)
    };
    let val = qids.split_off(qids.len() - n_val);
    (qids.into_iter().collect(), val.into_iter().collect())
}

struct Training {
    initial: AnyRanker,
    outcome: TrainOutcome<AnyRanker>,
    num_pairs: usize,
    skipped_queries: Vec<String>,
}

impl<'s> Experiment<'s> {
    fn new(spec: &'s ExperimentSpec, log: Rc<AccessLog>) -> Result<Self, HarnessError> {
        let mut world: Option<SyntheticWorld> = spec.synthetic.as_ref().map(|cfg| generate(cfg, spec.seed));
        let mut extra_checksums = BTreeMap::new();
        let embeddings = match spec.embeddings.kind {
            EmbeddingKind::Mock => Embeddings::Mock {
                dim: spec.embeddings.dim,
                seed: spec.seed,
            },
            EmbeddingKind::File => {
                let path = spec.embeddings.path.as_ref().expect("checked by the spec");
                let bytes = std::fs::read(path).map_err(|e| HarnessError::io(path, e))?;
                let name = path.file_name().map_or_else(|| path.display().to_string(), |n| n.to_string_lossy().into_owned());
                extra_checksums.insert(format!("embeddings/{name}"), hex::encode(Sha256::digest(&bytes)));
                Embeddings::Table(load_embedding_table(path)?)
            }
            EmbeddingKind::AlignedSynthetic => {
                let w = world.as_ref().expect("checked by the spec");
                let noise = spec.synthetic.as_ref().map_or(0.5, |c| c.noise);
                Embeddings::Table(w.aligned_embeddings(spec.embeddings.dim, noise, spec.seed))
            }
        };
        let (source, target, companion) = match world.take() {
            Some(w) => (
                Some(Collection::synthetic(w.source, log.clone())),
                Collection::synthetic(w.target, log.clone()),
                Some(Collection::synthetic(w.few_shot, log.clone())),
            ),
            None => (
                spec.source.clone().map(|c| Collection::from_spec(c, log.clone())),
                Collection::from_spec(spec.target.clone().expect("checked by the spec"), log.clone()),
                spec.few_shot.clone().map(|c| Collection::from_spec(c, log.clone())),
            ),
        };
        Ok(Self {
            spec,
            log,
            source,
            target,
            companion,
            embeddings,
            extra_checksums,
        })
    }

    fn open<'a>(&'a self, coll: &'a Collection) -> Result<Side<'a>, HarnessError> {
        let index = coll.index()?;
        let queries = coll.queries()?;
        let table = match &self.embeddings {
            Embeddings::Table(t) => Cow::Borrowed(t),
            Embeddings::Mock { dim, seed } => {
                let mut vocab: BTreeSet<&str> = index.vocabulary().iter().map(String::as_str).collect();
                vocab.extend(queries.values().flatten().map(String::as_str));
                let vocab: Vec<&str> = vocab.into_iter().collect();
                Cow::Owned(mock_embeddings(&vocab, *dim, *seed)?)
            }
        };
        Ok(Side {
            coll,
            index,
            queries,
            table,
        })
    }

    fn initial_model(&self) -> AnyRanker {
        match self.spec.model {
            ModelChoice::Pacrr => AnyRanker::Pacrr(PacrrModel::random(self.spec.pacrr.clone(), self.spec.seed)),
            _ => AnyRanker::Knrm(KnrmModel::random(KnrmModel::default_kernels(), self.spec.seed, self.spec.init_scale)),
        }
    }

    /// Train and validation qids of a collection, splitting when it has no
    /// folds of its own.
    fn folds(&self, coll: &Collection) -> Result<(BTreeSet<String>, BTreeSet<String>), HarnessError> {
        let (train, val) = coll.folds()?;
        let fraction = self.spec.synthetic.as_ref().map_or(0.25, |c| c.validation_fraction);
        Ok(match (train, val) {
            (Some(t), Some(v)) => (t.clone(), v.clone()),
            (Some(t), None) => split_folds(t.iter().cloned().collect(), fraction, self.spec.seed),
            (None, Some(v)) => {
                let t = coll.qrels()?.keys().filter(|q| !v.contains(*q)).cloned().collect();
                (t, v.clone())
            }
            (None, None) => split_folds(coll.qrels()?.keys().cloned().collect(), fraction, self.spec.seed),
        })
    }

    /// Pairs for the given queries, with qids namespaced by collection and
    /// every needed matrix added to `cache`.
    fn pairs_for(
        &self,
        side: &Side<'_>,
        qids: Option<&BTreeSet<String>>,
        caps: (usize, usize),
        cache: &mut MatrixCache,
        skipped: &mut Vec<String>,
    ) -> Result<Vec<TrainPair>, HarnessError> {
        let pools = side.bm25(qids, self.spec.run_depth, &self.spec.retrieval);
        let policy = PairPolicy {
            cap: self.spec.train.pairs_per_query,
            ..PairPolicy::default()
        };
        let set = make_pairs(side.coll.qrels()?, &pools, qids, policy, self.spec.seed);
        skipped.extend(set.skipped.iter().map(|q| side.key(q)));
        let mut out = Vec::with_capacity(set.pairs.len());
        for p in set.pairs {
            let terms = &side.queries.get(&p.qid).map(Vec::as_slice).unwrap_or(&[]);
            let key = side.key(&p.qid);
            let ok_pos = cache.add(side.index, &side.table, caps, &key, terms, &p.pos);
            let ok_neg = cache.add(side.index, &side.table, caps, &key, terms, &p.neg);
            if ok_pos && ok_neg {
                out.push(TrainPair::new(key, p.pos, p.neg));
            } else {
                log::warn!("{}: pair ({}, {}) names a document missing from the index", side.key(&p.qid), p.pos, p.neg);
            }
        }
        Ok(out)
    }

    fn train_on(&self, train_side: &Side<'_>, companion: Option<&Side<'_>>) -> Result<Training, HarnessError> {
        let initial = self.initial_model();
        let caps = initial.caps();
        let (train_q, val_q) = self.folds(train_side.coll)?;
        if val_q.is_empty() {
            return Err(HarnessError::Data {
                what: format!("collection {}", train_side.coll.name()),
                message: "no validation queries".into(),
            });
        }
        let mut cache = MatrixCache::new();
        let mut skipped = Vec::new();
        let source_pairs = self.pairs_for(train_side, Some(&train_q), caps, &mut cache, &mut skipped)?;
        let target_pairs = match companion {
            Some(c) => self.pairs_for(c, None, caps, &mut cache, &mut skipped)?,
            None => Vec::new(),
        };
        let num_pairs = source_pairs.len() + target_pairs.len();
        if num_pairs == 0 {
            return Err(HarnessError::Data {
                what: format!("collection {}", train_side.coll.name()),
                message: "no training pairs".into(),
            });
        }

        let val_runs: Vec<RunList> = train_side
            .bm25(Some(&val_q), self.spec.rerank_depth, &self.spec.retrieval)
            .into_values()
            .collect();
        for run in &val_runs {
            let terms = train_side.queries.get(&run.qid).map(Vec::as_slice).unwrap_or(&[]);
            for d in run.docnos() {
                cache.add(train_side.index, &train_side.table, caps, &train_side.key(&run.qid), terms, d);
            }
        }
        let val_qrels = train_side.coll.qrels()?;
        let k = self.spec.rerank_depth;
        let validate = |model: &AnyRanker, _epoch: usize| -> Result<f64, String> {
            let reranked: Vec<RunList> = val_runs
                .iter()
                .map(|run| {
                    let key = train_side.key(&run.qid);
                    let scores: Vec<f64> = run
                        .docnos()
                        .take(k)
                        .map(|d| cache.matrix(&key, d).map_or(f64::NEG_INFINITY, |m| model.forward(m)))
                        .collect();
                    reorder_head(run, &scores, k)
                })
                .collect();
            let report = evaluate(&reranked, val_qrels, &[VALIDATION_METRIC]);
            if report.num_queries() == 0 {
                return Err("no validation query has a relevant document".into());
            }
            Ok(report.mean(VALIDATION_METRIC).expect("metric requested"))
        };

        let mut stream: Box<dyn PairStream> = if companion.is_some() {
            if target_pairs.is_empty() {
                log::warn!("the few-shot companion produced no pairs; training is zero-shot");
            }
            Box::new(InterleavedPairs::new(source_pairs, target_pairs, self.spec.seed))
        } else {
            Box::new(ShuffledPairs::new(source_pairs, self.spec.seed))
        };
        let outcome = train(initial.clone(), stream.as_mut(), &cache, &self.spec.train, validate)?;
        Ok(Training {
            initial,
            outcome,
            num_pairs,
            skipped_queries: skipped,
        })
    }

    fn train_phase(&self, mode: Mode) -> Result<Training, HarnessError> {
        self.log.set_phase(Phase::Training);
        match mode {
            Mode::ZeroShot | Mode::FewShot => {
                let source = self.source.as_ref().ok_or_else(|| HarnessError::Spec("missing [source] collection".into()))?;
                let side = self.open(source)?;
                let companion = if mode == Mode::FewShot {
                    let c = self
                        .companion
                        .as_ref()
                        .ok_or_else(|| HarnessError::Spec("few_shot mode needs a [few_shot] collection".into()))?;
                    Some(self.open(c)?)
                } else {
                    None
                };
                self.train_on(&side, companion.as_ref())
            }
            Mode::Oracle => {
                let side = self.open(&self.target)?;
                self.train_on(&side, None)
            }
        }
    }

    fn run(self, mode: Mode) -> Result<Report, HarnessError> {
        let spec = self.spec;
        let training = if spec.model == ModelChoice::ExternalScores {
            None
        } else {
            Some(self.train_phase(mode)?)
        };

        self.log.set_phase(Phase::Testing);
        let target = self.open(&self.target)?;
        let bm25: Vec<RunList> = target
            .bm25(None, spec.run_depth, &spec.retrieval)
            .into_values()
            .map(|mut r| {
                r.tag = "bm25".into();
                r
            })
            .collect();
        let k = spec.rerank_depth;
        let mut systems: Vec<(String, Vec<RunList>)> = vec![("bm25".into(), bm25.clone())];
        let rerank_all = |model: &AnyRanker| -> Vec<RunList> {
            bm25.iter()
                .map(|run| {
                    let terms = target.queries.get(&run.qid).map(Vec::as_slice).unwrap_or(&[]);
                    rerank(model, run, terms, target.index, &target.table, k)
                })
                .collect()
        };
        if spec.baselines.contains(&Baseline::Shuffled) {
            systems.push(("shuffled".into(), bm25.iter().map(|r| shuffled_head(r, k, spec.seed)).collect()));
        }
        match &training {
            Some(t) => {
                if spec.baselines.contains(&Baseline::Untrained) {
                    let mut runs = rerank_all(&t.initial);
                    runs.iter_mut().for_each(|r| r.tag = "untrained".into());
                    systems.push(("untrained".into(), runs));
                }
                systems.push((spec.model.name().into(), rerank_all(&t.outcome.model)));
            }
            None => {
                let path = spec.external_scores.as_ref().expect("checked by the spec");
                let bytes = std::fs::read(path).map_err(|e| HarnessError::io(path, e))?;
                let name = path.file_name().map_or_else(|| path.display().to_string(), |n| n.to_string_lossy().into_owned());
                let mut extra = self.extra_checksums.clone();
                extra.insert(format!("external/{name}"), hex::encode(Sha256::digest(&bytes)));
                systems.push(("external".into(), ingest_external_scores(path, &bm25, k)?));
                return self.finish(mode, systems, None, extra);
            }
        }
        let extra = self.extra_checksums.clone();
        self.finish(mode, systems, training, extra)
    }

    fn finish(
        &self,
        mode: Mode,
        systems: Vec<(String, Vec<RunList>)>,
        training: Option<Training>,
        mut checksums: BTreeMap<String, String>,
    ) -> Result<Report, HarnessError> {
        let qrels = self.target.qrels()?;
        let results: Vec<SystemResult> = systems
            .into_iter()
            .map(|(name, runs)| {
                let metrics = evaluate(&runs, qrels, &Metric::STANDARD);
                SystemResult { name, runs, metrics }
            })
            .collect();
        let mut significance = Vec::new();
        for sys in &results[1..] {
            for &m in &Metric::STANDARD {
                let test = compare_reports(&sys.metrics, &results[0].metrics, m).ok();
                significance.push(Significance {
                    system: sys.name.clone(),
                    baseline: results[0].name.clone(),
                    metric: m,
                    test,
                });
            }
        }
        for c in [self.source.as_ref(), Some(&self.target), self.companion.as_ref()].into_iter().flatten() {
            checksums.extend(c.checksums());
        }
        let (train_log, best_epoch, skipped_pairs, num_pairs, skipped_queries, model) = match training {
            Some(t) => (
                t.outcome.log,
                Some(t.outcome.best_epoch),
                t.outcome.skipped_pairs,
                t.num_pairs,
                t.skipped_queries,
                Some(t.outcome.model),
            ),
            None => (Vec::new(), None, 0, 0, Vec::new(), None),
        };
        Ok(Report {
            name: self.spec.name.clone(),
            mode,
            model_name: self.spec.model.name().to_string(),
            seed: self.spec.seed,
            config_hash: self.spec.config_hash(),
            resolved_spec: self.spec.canonical_toml(),
            systems: results,
            significance,
            train_log,
            best_epoch,
            num_train_pairs: num_pairs,
            skipped_pairs,
            skipped_queries,
            model,
            checksums,
            accesses: self.log.events(),
        })
    }
}
