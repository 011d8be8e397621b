//! Similarity-matrix rerankers (KNRM and PACRR) with hand-written gradients,
//! the pairwise softmax loss, Adam, and a deterministic training loop.
//!
//! Every model keeps its trainable state in a [`Params`] set of named
//! tensors, which lets the optimizer, gradient checks and checkpoints treat
//! models uniformly. All arithmetic is `f64`.

mod adam;
mod checkpoint;
mod knrm;
mod loss;
mod pacrr;
mod rerank;
mod simmatrix;
mod train;

use thiserror::Error;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use checkpoint::{read_checkpoint, write_checkpoint, CheckpointError};
pub use knrm::{Kernel, KnrmModel};
pub use loss::{backward, pairwise_softmax_loss, pairwise_softmax_loss_grad};
pub use pacrr::{PacrrHyper, PacrrModel};
pub use rerank::{rerank, reorder_head};
pub use simmatrix::{sim_matrix, softmax, SimMatrix};
pub use train::{
    train, EpochRecord, FeatureSource, InterleavedPairs, MatrixCache, PairStream, ShuffledPairs,
    TrainConfig, TrainOutcome, TrainPair,
};

#[derive(Debug, Error)]
pub enum NeuralError {
    #[error("non-finite gradient for parameter '{param}' at element {element}")]
    NonFiniteGradient { param: String, element: usize },
    #[error("training pair list is empty")]
    NoPairs,
    #[error("invalid configuration: {0}")]
    Config(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(name: impl Into<String>, shape: &[usize]) -> Self {
        Self {
            name: name.into(),
            shape: shape.to_vec(),
            data: vec![0.0; shape.iter().product()],
        }
    }
}

/// Ordered collection of named tensors.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Params {
    pub tensors: Vec<Tensor>,
}

impl Params {
    pub fn zeros_like(&self) -> Self {
        Self {
            tensors: self
                .tensors
                .iter()
                .map(|t| Tensor::zeros(t.name.clone(), &t.shape))
                .collect(),
        }
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.tensors.iter().find(|t| t.name == name)
    }

    pub fn num_values(&self) -> usize {
        self.tensors.iter().map(|t| t.data.len()).sum()
    }

    pub fn scale(&mut self, factor: f64) {
        for t in &mut self.tensors {
            t.data.iter_mut().for_each(|x| *x *= factor);
        }
    }

    pub fn all_finite(&self) -> bool {
        self.tensors.iter().all(|t| t.data.iter().all(|x| x.is_finite()))
    }

    pub(crate) fn check_finite(&self) -> Result<(), NeuralError> {
        for t in &self.tensors {
            if let Some(element) = t.data.iter().position(|x| !x.is_finite()) {
                return Err(NeuralError::NonFiniteGradient {
                    param: t.name.clone(),
                    element,
                });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Knrm,
    Pacrr,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Knrm => "knrm",
            ModelKind::Pacrr => "pacrr",
        }
    }
}

/// A trainable scorer over similarity matrices.
pub trait Ranker {
    fn kind(&self) -> ModelKind;
    fn params(&self) -> &Params;
    fn params_mut(&mut self) -> &mut Params;
    fn forward(&self, m: &SimMatrix) -> f64;
    /// Adds `upstream · ∂score/∂θ` into `grads` (shaped like `params()`) and
    /// returns the score.
    fn accumulate_grad(&self, m: &SimMatrix, upstream: f64, grads: &mut Params) -> f64;
}

/// Either supported model, for code that picks the architecture at runtime.
#[derive(Debug, Clone, PartialEq)]
pub enum AnyRanker {
    Knrm(KnrmModel),
    Pacrr(PacrrModel),
}

impl Ranker for AnyRanker {
    fn kind(&self) -> ModelKind {
        match self {
            AnyRanker::Knrm(m) => m.kind(),
            AnyRanker::Pacrr(m) => m.kind(),
        }
    }

    fn params(&self) -> &Params {
        match self {
            AnyRanker::Knrm(m) => m.params(),
            AnyRanker::Pacrr(m) => m.params(),
        }
    }

    fn params_mut(&mut self) -> &mut Params {
        match self {
            AnyRanker::Knrm(m) => m.params_mut(),
            AnyRanker::Pacrr(m) => m.params_mut(),
        }
    }

    fn forward(&self, m: &SimMatrix) -> f64 {
        match self {
            AnyRanker::Knrm(k) => k.forward(m),
            AnyRanker::Pacrr(p) => p.forward(m),
        }
    }

    fn accumulate_grad(&self, m: &SimMatrix, upstream: f64, grads: &mut Params) -> f64 {
        match self {
            AnyRanker::Knrm(k) => k.accumulate_grad(m, upstream, grads),
            AnyRanker::Pacrr(p) => p.accumulate_grad(m, upstream, grads),
        }
    }
}

impl AnyRanker {
    /// Query/document truncation lengths the model expects.
    pub fn caps(&self) -> (usize, usize) {
        match self {
            AnyRanker::Knrm(_) => (KnrmModel::QUERY_CAP, KnrmModel::DOC_CAP),
            AnyRanker::Pacrr(p) => (p.hyper().lq, p.hyper().ld),
        }
    }
}
