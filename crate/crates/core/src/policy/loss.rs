//! PPO objective and its analytic gradient through the masked distribution.

use super::buffer::RolloutBuffer;
use super::distribution::masked_log_softmax_into;
use super::network::{BackwardScratch, ForwardCache, PolicyParams};
use super::{PolicyError, Result};

/// Per-sample clipped surrogate, `-min(r A, clip(r, 1-ε, 1+ε) A)`.
pub fn clipped_surrogate_loss(ratio: f64, advantage: f64, clip_epsilon: f64) -> f64 {
    let clipped = ratio.clamp(1.0 - clip_epsilon, 1.0 + clip_epsilon);
    -(ratio * advantage).min(clipped * advantage)
}

/// Derivative of [`clipped_surrogate_loss`] with respect to the ratio: `-A`
/// on the unclipped branch, else 0.
pub fn clipped_surrogate_dratio(ratio: f64, advantage: f64, clip_epsilon: f64) -> f64 {
    let clipped = ratio.clamp(1.0 - clip_epsilon, 1.0 + clip_epsilon);
    if ratio * advantage <= clipped * advantage {
        -advantage
    } else {
        0.0
    }
}

/// Derivative of [`clipped_surrogate_loss`] with respect to the new
/// log-probability: `-A r` when the unclipped branch is the minimum, else 0.
pub fn clipped_surrogate_dlogp(ratio: f64, advantage: f64, clip_epsilon: f64) -> f64 {
    let clipped = ratio.clamp(1.0 - clip_epsilon, 1.0 + clip_epsilon);
    if ratio * advantage <= clipped * advantage {
        -advantage * ratio
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights {
    pub clip_epsilon: f64,
    pub value_coef: f64,
    pub entropy_coef: f64,
}

/// Minibatch means of each loss component.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LossBreakdown {
    pub total: f64,
    pub policy: f64,
    pub value: f64,
    pub entropy: f64,
    pub clip_fraction: f64,
}

/// Total loss `policy + c_v * value_mse - c_e * entropy` over `indices`,
/// optionally accumulating its gradient into `grad`.
pub fn loss_and_grad(
    params: &PolicyParams,
    buffer: &RolloutBuffer,
    indices: &[usize],
    weights: &LossWeights,
    mut grad: Option<&mut PolicyParams>,
) -> Result<LossBreakdown> {
    if indices.is_empty() {
        return Ok(LossBreakdown::default());
    }
    let inv_b = 1.0 / indices.len() as f64;
    let mut cache = ForwardCache::default();
    let mut scratch = BackwardScratch::default();
    let mut log_probs = Vec::with_capacity(buffer.n_actions);
    let mut dlogits = vec![0.0; buffer.n_actions];
    let mut out = LossBreakdown::default();

    for &i in indices {
        let obs = buffer.obs(i);
        let mask = buffer.mask(i);
        let action = buffer.actions[i];
        let adv = buffer.advantages[i];
        let target = buffer.returns[i];
        params.forward_cached(obs, &mut cache)?;
        masked_log_softmax_into(&cache.logits, mask, &mut log_probs)?;

        let logp = log_probs[action];
        let ratio = (logp - buffer.log_probs[i]).exp();
        let policy = clipped_surrogate_loss(ratio, adv, weights.clip_epsilon);
        let entropy = super::distribution::entropy(&log_probs);
        let verr = cache.value - target;

        out.policy += policy * inv_b;
        out.value += verr * verr * inv_b;
        out.entropy += entropy * inv_b;
        if (ratio - 1.0).abs() > weights.clip_epsilon {
            out.clip_fraction += inv_b;
        }

        if let Some(grad) = grad.as_deref_mut() {
            let g_logp = clipped_surrogate_dlogp(ratio, adv, weights.clip_epsilon) * inv_b;
            let g_ent = -weights.entropy_coef * inv_b;
            for (j, d) in dlogits.iter_mut().enumerate() {
                *d = 0.0;
                if !mask[j] {
                    continue;
                }
                let lp = log_probs[j];
                let p = lp.exp();
                let onehot = if j == action { 1.0 } else { 0.0 };
                // d logp_a / dz_j = 1[j=a] - p_j ; dH/dz_j = -p_j (log p_j + H)
                *d = g_logp * (onehot - p) + g_ent * (-p * (lp + entropy));
            }
            let dvalue = 2.0 * weights.value_coef * verr * inv_b;
            params.backward(obs, &cache, &dlogits, dvalue, grad, &mut scratch);
        }
    }
    out.total = out.policy + weights.value_coef * out.value - weights.entropy_coef * out.entropy;
    if !out.total.is_finite() {
        return Err(PolicyError::NonFiniteLoss(format!(
            "policy={} value={} entropy={}",
            out.policy, out.value, out.entropy
        )));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn surrogate_examples() {
        assert_eq!(clipped_surrogate_loss(1.0, 0.7, 0.2), -0.7);
        assert!((clipped_surrogate_loss(2.0, 1.0, 0.2) - (-1.2)).abs() < 1e-15);
        assert!((clipped_surrogate_loss(0.5, -1.0, 0.2) - 0.8).abs() < 1e-15);
    }

    #[test]
    fn surrogate_gradient_vanishes_outside_trust_region() {
        assert_eq!(clipped_surrogate_dlogp(2.0, 1.0, 0.2), 0.0);
        assert_eq!(clipped_surrogate_dlogp(0.5, -1.0, 0.2), 0.0);
        assert_eq!(clipped_surrogate_dlogp(0.5, 1.0, 0.2), -0.5);
        assert_eq!(clipped_surrogate_dlogp(2.0, -1.0, 0.2), 2.0);
    }

    #[test]
    fn clip_bound_on_gradient_coefficient() {
        let eps = 0.2;
        for i in 0..200 {
            let r = 0.01 + i as f64 * 0.02;
            for a in [-2.0, -0.3, 0.0, 0.4, 3.0] {
                let g = clipped_surrogate_dratio(r, a, eps);
                assert!(g.abs() <= (1.0 + eps) * a.abs(), "r={r} a={a}");
                // chain rule through r = exp(logp - logp_old)
                assert_eq!(clipped_surrogate_dlogp(r, a, eps), g * r);
            }
        }
    }
}
