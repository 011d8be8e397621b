use std::cell::{Cell, OnceCell, RefCell};
use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::rc::Rc;

use sha2::{Digest, Sha256};

use super::spec::CollectionSpec;
use super::synthetic::{docs_to_trec, topics_to_trec, SyntheticCollection};
use super::HarnessError;
use crate::analysis::Analyzer;
use crate::corpus::{parse_qrels, parse_topics, parse_trec_docs, write_qrels, CollectionConfig, Language, Qrels, TopicField};
use crate::index::Index;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Phase {
    #[default]
    Training,
    Testing,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Resource {
    Documents,
    Topics,
    Qrels,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Access {
    pub phase: Phase,
    pub collection: String,
    pub resource: Resource,
}

/// Records every collection read together with the experiment phase it
/// happened in.
#[derive(Debug, Default)]
pub struct AccessLog {
    phase: Cell<Phase>,
    events: RefCell<Vec<Access>>,
}

impl AccessLog {
    pub fn new() -> Rc<Self> {
        Rc::new(Self::default())
    }

    pub fn set_phase(&self, phase: Phase) {
        self.phase.set(phase);
    }

    pub fn phase(&self) -> Phase {
        self.phase.get()
    }

    pub fn events(&self) -> Vec<Access> {
        self.events.borrow().clone()
    }

    fn record(&self, collection: &str, resource: Resource) {
        self.events.borrow_mut().push(Access {
            phase: self.phase.get(),
            collection: collection.to_string(),
            resource,
        });
    }
}

enum Origin {
    Files(CollectionSpec),
    Synthetic(SyntheticCollection),
}

/// A collection whose parts are loaded on first use. Every access is
/// logged, which is how tests prove that zero-shot training never touches
/// the test collection.
pub struct Collection {
    name: String,
    language: Language,
    field: TopicField,
    origin: Origin,
    log: Rc<AccessLog>,
    analyzer: Analyzer,
    index: OnceCell<Index>,
    queries: OnceCell<BTreeMap<String, Vec<String>>>,
    qrels: OnceCell<Qrels>,
    folds: OnceCell<(Option<BTreeSet<String>>, Option<BTreeSet<String>>)>,
    checksums: RefCell<BTreeMap<String, String>>,
}

fn sha256(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn read(path: &Path) -> Result<Vec<u8>, HarnessError> {
    std::fs::read(path).map_err(|e| HarnessError::io(path, e))
}

fn file_label(path: &Path) -> String {
    path.file_name().map_or_else(|| path.display().to_string(), |n| n.to_string_lossy().into_owned())
}

impl Collection {
    pub fn from_spec(spec: CollectionSpec, log: Rc<AccessLog>) -> Self {
        Self {
            name: spec.name.clone(),
            language: spec.language,
            field: spec.field,
            analyzer: Analyzer::for_language(spec.language),
            origin: Origin::Files(spec),
            log,
            index: OnceCell::new(),
            queries: OnceCell::new(),
            qrels: OnceCell::new(),
            folds: OnceCell::new(),
            checksums: RefCell::default(),
        }
    }

    pub fn synthetic(data: SyntheticCollection, log: Rc<AccessLog>) -> Self {
        Self {
            name: data.name.clone(),
            language: data.language,
            field: TopicField::Title,
            analyzer: Analyzer::for_language(data.language),
            origin: Origin::Synthetic(data),
            log,
            index: OnceCell::new(),
            queries: OnceCell::new(),
            qrels: OnceCell::new(),
            folds: OnceCell::new(),
            checksums: RefCell::default(),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn language(&self) -> Language {
        self.language
    }

    pub fn analyzer(&self) -> &Analyzer {
        &self.analyzer
    }

    fn note(&self, key: String, digest: String) {
        self.checksums.borrow_mut().insert(format!("{}/{key}", self.name), digest);
    }

    /// SHA-256 of every input read so far, keyed `collection/part/file`.
    pub fn checksums(&self) -> BTreeMap<String, String> {
        self.checksums.borrow().clone()
    }

    pub fn index(&self) -> Result<&Index, HarnessError> {
        self.log.record(&self.name, Resource::Documents);
        if let Some(ix) = self.index.get() {
            return Ok(ix);
        }
        let docs = match &self.origin {
            Origin::Synthetic(s) => {
                self.note("docs/docs.sgml".into(), sha256(docs_to_trec(&s.docs).as_bytes()));
                s.docs.clone()
            }
            Origin::Files(spec) => {
                let config = match &spec.config {
                    Some(p) => {
                        let bytes = read(p)?;
                        self.note(format!("config/{}", file_label(p)), sha256(&bytes));
                        let text = String::from_utf8_lossy(&bytes);
                        let cfg = CollectionConfig::parse(&text).map_err(|source| HarnessError::Corpus {
                            path: p.clone(),
                            source,
                        })?;
                        if cfg.language != spec.language {
                            return Err(HarnessError::Spec(format!(
                                "{}: config language {} disagrees with spec language {}",
                                spec.name, cfg.language, spec.language
                            )));
                        }
                        cfg
                    }
                    None => CollectionConfig::new(spec.language),
                };
                let mut docs = Vec::new();
                for p in &spec.docs {
                    let bytes = read(p)?;
                    self.note(format!("docs/{}", file_label(p)), sha256(&bytes));
                    let parsed = parse_trec_docs(&bytes[..], &config.content_tags, spec.language)
                        .map_err(|source| HarnessError::Corpus { path: p.clone(), source })?;
                    for e in &parsed.errors {
                        log::warn!("{}: byte {}: {}", p.display(), e.location, e.message);
                    }
                    for w in &parsed.warnings {
                        log::warn!("{}: {w}", p.display());
                    }
                    docs.extend(parsed.records);
                }
                docs
            }
        };
        if docs.is_empty() {
            return Err(HarnessError::Data {
                what: format!("collection {}", self.name),
                message: "no documents".into(),
            });
        }
        let ix = Index::build(&docs, &self.analyzer)?;
        Ok(self.index.get_or_init(|| ix))
    }

    /// Analyzed query terms per qid.
    pub fn queries(&self) -> Result<&BTreeMap<String, Vec<String>>, HarnessError> {
        self.log.record(&self.name, Resource::Topics);
        if let Some(q) = self.queries.get() {
            return Ok(q);
        }
        let topics = match &self.origin {
            Origin::Synthetic(s) => {
                self.note("topics/topics.txt".into(), sha256(topics_to_trec(&s.topics).as_bytes()));
                s.topics.clone()
            }
            Origin::Files(spec) => {
                let bytes = read(&spec.topics)?;
                self.note(format!("topics/{}", file_label(&spec.topics)), sha256(&bytes));
                let parsed = parse_topics(&bytes[..], self.field, self.language).map_err(|source| HarnessError::Corpus {
                    path: spec.topics.clone(),
                    source,
                })?;
                for e in &parsed.errors {
                    log::warn!("{}: byte {}: {}", spec.topics.display(), e.location, e.message);
                }
                if !parsed.records.empty_field.is_empty() {
                    log::warn!(
                        "{}: empty query field for {}",
                        spec.topics.display(),
                        parsed.records.empty_field.join(", ")
                    );
                }
                parsed.records.topics
            }
        };
        let queries = topics
            .iter()
            .map(|t| (t.qid.clone(), self.analyzer.terms(t.text(self.field))))
            .collect();
        Ok(self.queries.get_or_init(|| queries))
    }

    pub fn qrels(&self) -> Result<&Qrels, HarnessError> {
        self.log.record(&self.name, Resource::Qrels);
        if let Some(q) = self.qrels.get() {
            return Ok(q);
        }
        let qrels = match &self.origin {
            Origin::Synthetic(s) => {
                let mut bytes = Vec::new();
                write_qrels(&s.qrels, &mut bytes).map_err(|e| HarnessError::io(Path::new("qrels"), e))?;
                self.note("qrels/qrels.txt".into(), sha256(&bytes));
                s.qrels.clone()
            }
            Origin::Files(spec) => {
                let bytes = read(&spec.qrels)?;
                self.note(format!("qrels/{}", file_label(&spec.qrels)), sha256(&bytes));
                let parsed = parse_qrels(&bytes[..]).map_err(|source| HarnessError::Corpus {
                    path: spec.qrels.clone(),
                    source,
                })?;
                for e in &parsed.errors {
                    log::warn!("{}: line {}: {}", spec.qrels.display(), e.location, e.message);
                }
                parsed.records
            }
        };
        Ok(self.qrels.get_or_init(|| qrels))
    }

    /// Train and validation qid sets, when the collection defines them.
    pub fn folds(&self) -> Result<(Option<&BTreeSet<String>>, Option<&BTreeSet<String>>), HarnessError> {
        self.log.record(&self.name, Resource::Topics);
        if self.folds.get().is_none() {
            let (train, val) = match &self.origin {
                Origin::Synthetic(s) => (
                    s.train_qids.as_ref().map(|q| q.iter().cloned().collect::<BTreeSet<_>>()),
                    s.validation_qids.as_ref().map(|q| q.iter().cloned().collect::<BTreeSet<_>>()),
                ),
                Origin::Files(spec) => {
                    let load = |p: &Option<std::path::PathBuf>, part: &str| -> Result<Option<BTreeSet<String>>, HarnessError> {
                        let Some(p) = p else { return Ok(None) };
                        let bytes = read(p)?;
                        self.note(format!("{part}/{}", file_label(p)), sha256(&bytes));
                        Ok(Some(
                            String::from_utf8_lossy(&bytes)
                                .lines()
                                .map(str::trim)
                                .filter(|l| !l.is_empty() && !l.starts_with('#'))
                                .map(str::to_string)
                                .collect(),
                        ))
                    };
                    (load(&spec.train_qids, "train_qids")?, load(&spec.validation_qids, "validation_qids")?)
                }
            };
            if let (Some(t), Some(v)) = (&train, &val) {
                let overlap: Vec<String> = t.intersection(v).cloned().collect();
                if !overlap.is_empty() {
                    return Err(HarnessError::FoldOverlap(overlap));
                }
            }
            let _ = self.folds.set((train, val));
        }
        let (t, v) = self.folds.get().expect("just set");
        Ok((t.as_ref(), v.as_ref()))
    }
}
