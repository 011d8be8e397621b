use serde::{Deserialize, Serialize};

use super::Params;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// First and second moment estimates plus the step counter.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Params,
    pub v: Params,
    pub t: u64,
}

impl AdamState {
    pub fn new(params: &Params) -> Self {
        Self {
            m: params.zeros_like(),
            v: params.zeros_like(),
            t: 0,
        }
    }
}

/// One bias-corrected Adam update, in place.
pub fn adam_step(params: &mut Params, grads: &Params, state: &mut AdamState, config: &AdamConfig) {
    assert_eq!(params.tensors.len(), grads.tensors.len(), "gradient layout mismatch");
    state.t += 1;
    let c1 = 1.0 - config.beta1.powi(state.t as i32);
    let c2 = 1.0 - config.beta2.powi(state.t as i32);
    for (k, (p, g)) in params.tensors.iter_mut().zip(&grads.tensors).enumerate() {
        assert_eq!(p.data.len(), g.data.len(), "shape mismatch for {}", p.name);
        let m = &mut state.m.tensors[k].data;
        let v = &mut state.v.tensors[k].data;
        for i in 0..p.data.len() {
            let gi = g.data[i];
            m[i] = config.beta1 * m[i] + (1.0 - config.beta1) * gi;
            v[i] = config.beta2 * v[i] + (1.0 - config.beta2) * gi * gi;
            let m_hat = m[i] / c1;
            let v_hat = v[i] / c2;
            p.data[i] -= config.lr * m_hat / (v_hat.sqrt() + config.eps);
        }
    }
}
