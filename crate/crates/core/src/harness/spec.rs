use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::synthetic::SyntheticConfig;
use super::HarnessError;
use crate::corpus::{Language, TopicField};
use crate::neural::{PacrrHyper, TrainConfig};
use crate::retrieval::RetrievalConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelChoice {
    Knrm,
    Pacrr,
    ExternalScores,
}

impl ModelChoice {
    pub fn name(self) -> &'static str {
        match self {
            ModelChoice::Knrm => "knrm",
            ModelChoice::Pacrr => "pacrr",
            ModelChoice::ExternalScores => "external",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    ZeroShot,
    FewShot,
    Oracle,
}

impl Mode {
    pub fn label(self) -> &'static str {
        match self {
            Mode::ZeroShot => "zero-shot",
            Mode::FewShot => "few-shot",
            Mode::Oracle => "oracle (trained on the test collection)",
        }
    }
}

/// Extra systems evaluated next to BM25 and the trained model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Baseline {
    /// The model at its initial (random) parameters.
    Untrained,
    /// The BM25 head in a seeded random order.
    Shuffled,
}

/// A collection on disk. Relative paths resolve against the spec file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CollectionSpec {
    pub name: String,
    pub language: Language,
    pub docs: Vec<PathBuf>,
    pub topics: PathBuf,
    pub qrels: PathBuf,
    #[serde(default)]
    pub field: TopicField,
    /// `key = value` collection configuration (content tags, encoding).
    pub config: Option<PathBuf>,
    /// Files with one qid per line.
    pub train_qids: Option<PathBuf>,
    pub validation_qids: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmbeddingKind {
    #[default]
    Mock,
    File,
    /// Concept-aligned vectors from the synthetic generator.
    AlignedSynthetic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmbeddingSpec {
    pub kind: EmbeddingKind,
    pub path: Option<PathBuf>,
    pub dim: usize,
}

impl Default for EmbeddingSpec {
    fn default() -> Self {
        Self {
            kind: EmbeddingKind::Mock,
            path: None,
            dim: 64,
        }
    }
}

fn default_rerank_depth() -> usize {
    100
}

fn default_run_depth() -> usize {
    1000
}

fn default_baselines() -> Vec<Baseline> {
    vec![Baseline::Untrained, Baseline::Shuffled]
}

fn default_init_scale() -> f64 {
    0.05
}

/// An experiment description, read from TOML.
///
/// ```toml
/// name = "zs-ar"
/// model = "knrm"            # knrm | pacrr | external_scores
/// mode = "zero_shot"        # zero_shot | few_shot | oracle
/// seed = 7
///
/// [source]                  # or a [synthetic] table instead of collections
/// name = "robust04"
/// language = "en"
/// docs = ["docs/robust04.sgml"]
/// topics = "topics.txt"
/// qrels = "qrels.txt"
/// train_qids = "folds/train.txt"
/// validation_qids = "folds/valid.txt"
///
/// [target]
/// name = "trec-ar-2002"
/// language = "ar"
/// docs = ["ar/docs.sgml"]
/// topics = "ar/topics.txt"
/// qrels = "ar/qrels.txt"
///
/// [embeddings]
/// kind = "file"
/// path = "vectors.emb1"
/// ```
///
/// `[train]`, `[retrieval]` and `[pacrr]` override the library defaults;
/// the fully resolved values are echoed into every report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub name: String,
    pub model: ModelChoice,
    pub mode: Mode,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_rerank_depth")]
    pub rerank_depth: usize,
    #[serde(default = "default_run_depth")]
    pub run_depth: usize,
    #[serde(default = "default_baselines")]
    pub baselines: Vec<Baseline>,
    /// Half-width of the uniform range for initial KNRM weights.
    #[serde(default = "default_init_scale")]
    pub init_scale: f64,
    pub source: Option<CollectionSpec>,
    pub target: Option<CollectionSpec>,
    pub few_shot: Option<CollectionSpec>,
    pub synthetic: Option<SyntheticConfig>,
    /// `qid docno score` file for `model = "external_scores"`.
    pub external_scores: Option<PathBuf>,
    #[serde(default)]
    pub embeddings: EmbeddingSpec,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub retrieval: RetrievalConfig,
    #[serde(default)]
    pub pacrr: PacrrHyper,
    /// Canonical text captured before paths were made absolute, so the
    /// config hash does not depend on where the spec file lives.
    #[serde(skip)]
    canonical: Option<String>,
}

impl ExperimentSpec {
    pub fn from_toml(text: &str) -> Result<Self, HarnessError> {
        let spec: Self = toml::from_str(text).map_err(|e| HarnessError::Spec(e.to_string()))?;
        spec.resolved().check()
    }

    /// Reads a spec file; relative paths become relative to its directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, HarnessError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        let mut spec = Self::from_toml(&text)?;
        spec.canonical = Some(spec.canonical_toml());
        if let Some(dir) = path.parent() {
            spec.rebase(dir);
        }
        Ok(spec)
    }

    fn rebase(&mut self, dir: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = dir.join(&*p);
            }
        };
        for c in [&mut self.source, &mut self.target, &mut self.few_shot].into_iter().flatten() {
            c.docs.iter_mut().for_each(fix);
            fix(&mut c.topics);
            fix(&mut c.qrels);
            for p in [&mut c.config, &mut c.train_qids, &mut c.validation_qids].into_iter().flatten() {
                fix(p);
            }
        }
        if let Some(p) = &mut self.external_scores {
            fix(p);
        }
        if let Some(p) = &mut self.embeddings.path {
            fix(p);
        }
    }

    /// The spec seed drives training as well.
    fn resolved(mut self) -> Self {
        self.train.seed = self.seed;
        self.baselines.sort();
        self.baselines.dedup();
        self
    }

    fn check(self) -> Result<Self, HarnessError> {
        let bad = |m: String| Err(HarnessError::Spec(m));
        if self.rerank_depth == 0 || self.run_depth < self.rerank_depth {
            return bad("need 1 <= rerank_depth <= run_depth".into());
        }
        self.train.validate().map_err(|e| HarnessError::Spec(e.to_string()))?;
        let named = self.source.is_some() || self.target.is_some() || self.few_shot.is_some();
        if self.synthetic.is_some() && named {
            return bad("a synthetic experiment must not also name collections".into());
        }
        if self.synthetic.is_none() && self.target.is_none() {
            return bad("missing [target] collection".into());
        }
        if self.synthetic.is_none() {
            if self.mode != Mode::Oracle && self.model != ModelChoice::ExternalScores && self.source.is_none() {
                return bad(format!("mode {} needs a [source] collection", self.mode.label()));
            }
            if self.mode == Mode::FewShot {
                let (Some(fs), Some(t)) = (&self.few_shot, &self.target) else {
                    return bad("few_shot mode needs a [few_shot] companion collection".into());
                };
                if fs.qrels == t.qrels || fs.topics == t.topics || fs.name == t.name {
                    return bad("the few-shot companion must be distinct from the test collection".into());
                }
            }
        }
        if self.model == ModelChoice::ExternalScores && self.external_scores.is_none() {
            return bad("model external_scores needs an external_scores file".into());
        }
        match self.embeddings.kind {
            EmbeddingKind::File if self.embeddings.path.is_none() => return bad("embeddings kind file needs a path".into()),
            EmbeddingKind::AlignedSynthetic if self.synthetic.is_none() => {
                return bad("aligned_synthetic embeddings need a [synthetic] table".into())
            }
            EmbeddingKind::Mock | EmbeddingKind::AlignedSynthetic if self.embeddings.dim < 2 => {
                return bad("embedding dim must be at least 2".into())
            }
            _ => {}
        }
        Ok(self)
    }

    /// Canonical TOML of the resolved spec.
    pub fn canonical_toml(&self) -> String {
        if let Some(c) = &self.canonical {
            return c.clone();
        }
        toml::to_string(self).expect("spec serializes")
    }

    pub fn config_hash(&self) -> String {
        hex::encode(Sha256::digest(self.canonical_toml().as_bytes()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SYNTH: &str = r#"
name = "zs"
model = "knrm"
mode = "zero_shot"
seed = 3

[synthetic]

[embeddings]
kind = "aligned_synthetic"
dim = 16

[train]
max_epochs = 5
"#;

    #[test]
    fn defaults_resolve() {
        let s = ExperimentSpec::from_toml(SYNTH).unwrap();
        assert_eq!(s.train.seed, 3);
        assert_eq!(s.train.max_epochs, 5);
        assert_eq!(s.train.batch_size, 16);
        assert_eq!(s.rerank_depth, 100);
        assert_eq!(s.retrieval.bm25.k1, 0.9);
        assert_eq!(s.pacrr.ld, 800);
        let again = ExperimentSpec::from_toml(&s.canonical_toml()).unwrap();
        assert_eq!(again, s);
        assert_eq!(again.config_hash(), s.config_hash());
    }

    #[test]
    fn rejects_bad_specs() {
        assert!(ExperimentSpec::from_toml("name='x'\nmodel='knrm'\nmode='zero_shot'\n").is_err());
        assert!(ExperimentSpec::from_toml(&SYNTH.replace("seed = 3", "seed = 3\nbogus = 1")).is_err());
        assert!(ExperimentSpec::from_toml(&SYNTH.replace("model = \"knrm\"", "model = \"external_scores\"")).is_err());
        assert!(ExperimentSpec::from_toml(&SYNTH.replace("max_epochs = 5", "max_epochs = 0")).is_err());
    }

    #[test]
    fn few_shot_companion_must_differ() {
        let text = r#"
name = "fs"
model = "knrm"
mode = "few_shot"
[source]
name = "s"
language = "en"
docs = ["s.sgml"]
topics = "s.top"
qrels = "s.qrels"
[target]
name = "t"
language = "es"
docs = ["t.sgml"]
topics = "t.top"
qrels = "t.qrels"
[few_shot]
name = "f"
language = "es"
docs = ["t.sgml"]
topics = "f.top"
qrels = "t.qrels"
"#;
        let err = ExperimentSpec::from_toml(text).unwrap_err();
        assert!(err.to_string().contains("distinct"), "{err}");
        let ok = text.replacen("qrels = \"t.qrels\"\n", "qrels = \"t.qrels\"\n", 1).replace(
            "topics = \"f.top\"\nqrels = \"t.qrels\"",
            "topics = \"f.top\"\nqrels = \"f.qrels\"",
        );
        let spec = ExperimentSpec::from_toml(&ok).unwrap();
        let mut rebased = spec.clone();
        rebased.rebase(Path::new("/data"));
        assert_eq!(rebased.target.unwrap().qrels, PathBuf::from("/data/t.qrels"));
    }
}
