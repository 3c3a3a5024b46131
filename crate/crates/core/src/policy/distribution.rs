use rand::Rng;

use super::{PolicyError, Result};

/// Log-probabilities of the softmax restricted to `mask`.
///
/// Masked entries get `-inf` (probability exactly zero) and are excluded from
/// the max and the normalizer, so their logits never influence the result.
pub fn masked_log_softmax(logits: &[f64], mask: &[bool]) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(logits.len());
    masked_log_softmax_into(logits, mask, &mut out)?;
    Ok(out)
}

pub fn masked_log_softmax_into(logits: &[f64], mask: &[bool], out: &mut Vec<f64>) -> Result<()> {
    if logits.len() != mask.len() {
        return Err(PolicyError::Shape(format!(
            "{} logits vs {} mask entries",
            logits.len(),
            mask.len()
        )));
    }
    let max = logits
        .iter()
        .zip(mask)
        .filter(|(_, &m)| m)
        .map(|(&z, _)| z)
        .fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return Err(PolicyError::EmptyMask);
    }
    let sum: f64 = logits
        .iter()
        .zip(mask)
        .filter(|(_, &m)| m)
        .map(|(&z, _)| (z - max).exp())
        .sum();
    let log_z = max + sum.ln();
    out.clear();
    out.extend(
        logits
            .iter()
            .zip(mask)
            .map(|(&z, &m)| if m { z - log_z } else { f64::NEG_INFINITY }),
    );
    Ok(())
}

pub fn probabilities(log_probs: &[f64]) -> Vec<f64> {
    log_probs.iter().map(|lp| lp.exp()).collect()
}

/// Entropy over the support of a masked distribution.
pub fn entropy(log_probs: &[f64]) -> f64 {
    -log_probs
        .iter()
        .filter(|lp| lp.is_finite())
        .map(|&lp| lp.exp() * lp)
        .sum::<f64>()
}

/// Draws an action (or the argmax, lowest index on ties) and returns it with
/// its log-probability. Zero-probability entries are never returned.
pub fn sample_action<R: Rng + ?Sized>(log_probs: &[f64], rng: &mut R, deterministic: bool) -> (usize, f64) {
    if deterministic {
        let mut best = 0;
        for (i, &lp) in log_probs.iter().enumerate() {
            if lp > log_probs[best] {
                best = i;
            }
        }
        return (best, log_probs[best]);
    }
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    let mut last = None;
    for (i, &lp) in log_probs.iter().enumerate() {
        let p = lp.exp();
        if p <= 0.0 {
            continue;
        }
        acc += p;
        last = Some(i);
        if u < acc {
            return (i, lp);
        }
    }
    // rounding left u above the accumulated mass
    let i = last.expect("distribution has support");
    (i, log_probs[i])
}
