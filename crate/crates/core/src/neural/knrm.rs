use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{ModelKind, Params, Ranker, SimMatrix, Tensor};

/// Log-clamp floor for kernel sums.
pub const LOG_EPS: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Kernel {
    pub mu: f64,
    pub sigma: f64,
}

/// Gaussian kernel pooling ranker. Kernels are fixed; the linear layer
/// (`w`, `b`) is learned and squashed by `tanh`.
#[derive(Debug, Clone, PartialEq)]
pub struct KnrmModel {
    kernels: Vec<Kernel>,
    params: Params,
}

impl KnrmModel {
    pub const QUERY_CAP: usize = 16;
    pub const DOC_CAP: usize = 800;

    /// Exact-match kernel plus ten soft-match kernels at -0.9, -0.7, …, 0.9.
    pub fn default_kernels() -> Vec<Kernel> {
        let mut k = vec![Kernel {
            mu: 1.0,
            sigma: 1e-3,
        }];
        k.extend((0..10).map(|i| Kernel {
            mu: -0.9 + 0.2 * i as f64,
            sigma: 0.1,
        }));
        k
    }

    pub fn zeros(kernels: Vec<Kernel>) -> Self {
        assert!(kernels.iter().all(|k| k.sigma > 0.0), "kernel widths must be positive");
        let params = Params {
            tensors: vec![Tensor::zeros("w", &[kernels.len()]), Tensor::zeros("b", &[1])],
        };
        Self { kernels, params }
    }

    /// Weights drawn uniformly from ±`scale`, bias zero.
    pub fn random(kernels: Vec<Kernel>, seed: u64, scale: f64) -> Self {
        let mut m = Self::zeros(kernels);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for w in &mut m.params.tensors[0].data {
            *w = rng.gen_range(-scale..scale);
        }
        m
    }

    pub fn from_params(kernels: Vec<Kernel>, w: Vec<f64>, b: f64) -> Self {
        assert_eq!(w.len(), kernels.len());
        let mut m = Self::zeros(kernels);
        m.params.tensors[0].data = w;
        m.params.tensors[1].data[0] = b;
        m
    }

    pub fn kernels(&self) -> &[Kernel] {
        &self.kernels
    }

    pub fn weights(&self) -> &[f64] {
        &self.params.tensors[0].data
    }

    pub fn bias(&self) -> f64 {
        self.params.tensors[1].data[0]
    }

    /// Soft-TF features: per kernel, the sum over query rows of the log
    /// kernel mass of that row. Row values are summed in sorted order, so
    /// the result does not depend on document term order at all.
    pub fn features(&self, m: &SimMatrix) -> Vec<f64> {
        let mut phi = vec![0.0; self.kernels.len()];
        let mut row = Vec::with_capacity(m.cols());
        for i in 0..m.rows() {
            row.clear();
            row.extend_from_slice(m.row(i));
            row.sort_by(f64::total_cmp);
            for (k, kernel) in self.kernels.iter().enumerate() {
                let denom = 2.0 * kernel.sigma * kernel.sigma;
                let mass: f64 = row
                    .iter()
                    .map(|&s| (-(s - kernel.mu) * (s - kernel.mu) / denom).exp())
                    .sum();
                phi[k] += mass.max(LOG_EPS).ln();
            }
        }
        phi
    }

    fn pre_activation(&self, phi: &[f64]) -> f64 {
        self.weights().iter().zip(phi).map(|(w, f)| w * f).sum::<f64>() + self.bias()
    }
}

impl Ranker for KnrmModel {
    fn kind(&self) -> ModelKind {
        ModelKind::Knrm
    }

    fn params(&self) -> &Params {
        &self.params
    }

    fn params_mut(&mut self) -> &mut Params {
        &mut self.params
    }

    fn forward(&self, m: &SimMatrix) -> f64 {
        self.pre_activation(&self.features(m)).tanh()
    }

    fn accumulate_grad(&self, m: &SimMatrix, upstream: f64, grads: &mut Params) -> f64 {
        let phi = self.features(m);
        let score = self.pre_activation(&phi).tanh();
        let dz = upstream * (1.0 - score * score);
        for (g, f) in grads.tensors[0].data.iter_mut().zip(&phi) {
            *g += dz * f;
        }
        grads.tensors[1].data[0] += dz;
        score
    }
}
