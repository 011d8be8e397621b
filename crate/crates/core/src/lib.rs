pub mod analysis;
pub mod corpus;
pub mod embeddings;
pub mod eval;
pub mod harness;
pub mod index;
pub mod neural;
pub mod retrieval;

pub use analysis::Analyzer;
pub use corpus::{CorpusError, Document, Language, Qrels, Topic, TopicField};
pub use embeddings::{EmbeddingError, EmbeddingTable};
pub use eval::{EvalError, Metric, MetricReport};
pub use harness::{ExperimentSpec, HarnessError, Report};
pub use index::{Index, IndexError};
pub use neural::{AnyRanker, NeuralError, SimMatrix, TrainConfig};
pub use retrieval::{RetrievalConfig, RunList, Scorer, WeightedQuery};
