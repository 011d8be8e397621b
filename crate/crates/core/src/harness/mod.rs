//! Experiment orchestration: zero-shot, few-shot and oracle runs over real
//! or synthetic collections, external score ingestion, and reports.

mod collection;
mod experiment;
mod external;
mod pairs;
mod report;
mod spec;
pub mod synthetic;

use std::io;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::corpus::CorpusError;
use crate::embeddings::EmbeddingError;
use crate::eval::EvalError;
use crate::index::IndexError;
use crate::neural::{CheckpointError, NeuralError};

pub use collection::{Access, AccessLog, Collection, Phase, Resource};
pub use experiment::{run_experiment, run_few_shot, run_oracle, run_zero_shot, shuffled_head, train_from_spec};
pub use external::{apply_external_scores, ingest_external_scores, parse_score_tsv, ScoreTable};
pub use pairs::{interleave_few_shot, make_pairs, PairPolicy, PairSet};
pub use report::{Report, Significance, SystemResult};
pub use spec::{Baseline, CollectionSpec, EmbeddingKind, EmbeddingSpec, ExperimentSpec, Mode, ModelChoice};
pub use synthetic::{generate as generate_synthetic, SyntheticConfig, SyntheticWorld};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid experiment spec: {0}")]
    Spec(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}: {source}")]
    Corpus { path: PathBuf, source: CorpusError },
    #[error(transparent)]
    Index(#[from] IndexError),
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
    #[error(transparent)]
    Neural(#[from] NeuralError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error("train and validation folds share queries: {}", .0.join(", "))]
    FoldOverlap(Vec<String>),
    #[error("{what} has no usable data: {message}")]
    Data { what: String, message: String },
    #[error("score file line {line}: {message}")]
    ScoreLine { line: usize, message: String },
    #[error("duplicate score for ({qid}, {docno}) at line {line}")]
    DuplicateScore { qid: String, docno: String, line: usize },
    #[error("no external score for {} head candidate(s): {}", .0.len(), format_pairs(.0))]
    MissingScores(Vec<(String, String)>),
}

fn format_pairs(pairs: &[(String, String)]) -> String {
    let shown: Vec<String> = pairs.iter().take(20).map(|(q, d)| format!("{q}/{d}")).collect();
    let more = if pairs.len() > 20 { format!(" (+{} more)", pairs.len() - 20) } else { String::new() };
    format!("{}{more}", shown.join(", "))
}

impl HarnessError {
    pub(crate) fn io(path: &Path, source: io::Error) -> Self {
        HarnessError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}
