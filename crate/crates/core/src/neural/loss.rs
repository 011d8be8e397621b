use super::{NeuralError, Params, Ranker, SimMatrix};

/// `ln(1 + e^x)` without overflow for large `|x|`.
pub(crate) fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Negative log-probability of the positive document under a two-way
/// softmax.
pub fn pairwise_softmax_loss(s_pos: f64, s_neg: f64) -> f64 {
    softplus(s_neg - s_pos)
}

/// `(∂loss/∂s_pos, ∂loss/∂s_neg)`.
pub fn pairwise_softmax_loss_grad(s_pos: f64, s_neg: f64) -> (f64, f64) {
    let p = sigmoid(s_neg - s_pos);
    (-p, p)
}

/// Mean pairwise loss over a batch and its exact gradient with respect to
/// every model parameter.
pub fn backward<R: Ranker + ?Sized>(
    model: &R,
    batch: &[(&SimMatrix, &SimMatrix)],
) -> Result<(f64, Params), NeuralError> {
    if batch.is_empty() {
        return Err(NeuralError::NoPairs);
    }
    let scale = 1.0 / batch.len() as f64;
    let mut grads = model.params().zeros_like();
    let mut loss = 0.0;
    for (pos, neg) in batch {
        let s_pos = model.forward(pos);
        let s_neg = model.forward(neg);
        loss += pairwise_softmax_loss(s_pos, s_neg);
        let (g_pos, g_neg) = pairwise_softmax_loss_grad(s_pos, s_neg);
        model.accumulate_grad(pos, g_pos * scale, &mut grads);
        model.accumulate_grad(neg, g_neg * scale, &mut grads);
    }
    grads.check_finite()?;
    Ok((loss * scale, grads))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::{Kernel, KnrmModel};

    #[test]
    fn loss_values() {
        assert!((pairwise_softmax_loss(0.3, 0.3) - std::f64::consts::LN_2).abs() < 1e-12);
        assert!(pairwise_softmax_loss(20.0, 0.0) < 1e-8);
        assert!((pairwise_softmax_loss(1.0, 0.0) - 0.313262).abs() < 1e-6);
        assert!(pairwise_softmax_loss(-800.0, 800.0).is_finite());
        assert!(pairwise_softmax_loss(800.0, -800.0) >= 0.0);
    }

    #[test]
    fn loss_decreases_with_margin() {
        let mut last = f64::INFINITY;
        for i in -50..50 {
            let l = pairwise_softmax_loss(i as f64 * 0.3, 0.0);
            assert!(l > 0.0 && l < last);
            last = l;
        }
    }

    #[test]
    fn symmetric_pair_has_zero_bias_gradient() {
        let model = KnrmModel::zeros(KnrmModel::default_kernels());
        let m = SimMatrix::from_parts(1, 2, vec![0.2, 0.8], vec![1.0]);
        let (loss, g) = backward(&model, &[(&m, &m)]).unwrap();
        assert!((loss - std::f64::consts::LN_2).abs() < 1e-12);
        assert_eq!(g.get("b").unwrap().data[0], 0.0);
    }

    #[test]
    fn knrm_one_by_one_hand_gradient() {
        let kernels = vec![Kernel { mu: 0.5, sigma: 0.2 }, Kernel { mu: -0.3, sigma: 0.4 }];
        let model = KnrmModel::from_params(kernels.clone(), vec![0.7, -0.4], 0.1);
        let (sp, sn) = (0.9, -0.2);
        let pos = SimMatrix::from_parts(1, 1, vec![sp], vec![1.0]);
        let neg = SimMatrix::from_parts(1, 1, vec![sn], vec![1.0]);

        // On a 1×1 matrix φ_k = −(s−μ_k)²/(2σ_k²).
        let phi = |s: f64| -> Vec<f64> {
            kernels.iter().map(|k| -(s - k.mu).powi(2) / (2.0 * k.sigma * k.sigma)).collect()
        };
        let score = |f: &[f64]| (0.7 * f[0] - 0.4 * f[1] + 0.1f64).tanh();
        let (fp, fn_) = (phi(sp), phi(sn));
        let (yp, yn) = (score(&fp), score(&fn_));
        let g = 1.0 / (1.0 + (yp - yn).exp());
        let expect: Vec<f64> = (0..2)
            .map(|k| g * ((1.0 - yn * yn) * fn_[k] - (1.0 - yp * yp) * fp[k]))
            .collect();

        let (_, grads) = backward(&model, &[(&pos, &neg)]).unwrap();
        let w = &grads.get("w").unwrap().data;
        for k in 0..2 {
            assert!((w[k] - expect[k]).abs() < 1e-12, "k={k}: {} vs {}", w[k], expect[k]);
        }
        let expect_b = g * ((1.0 - yn * yn) - (1.0 - yp * yp));
        assert!((grads.get("b").unwrap().data[0] - expect_b).abs() < 1e-12);
    }

    #[test]
    fn empty_batch_is_an_error() {
        let model = KnrmModel::zeros(KnrmModel::default_kernels());
        assert!(matches!(backward(&model, &[]), Err(NeuralError::NoPairs)));
    }
}
