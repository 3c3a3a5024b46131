use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{PolicyError, Result};

/// Affine layer `y = W x + b` with `W` stored row-major (`rows` outputs by
/// `cols` inputs).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub rows: usize,
    pub cols: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Dense {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            weights: vec![0.0; rows * cols],
            bias: vec![0.0; rows],
        }
    }

    /// Orthogonal initialization scaled by `gain`, zero bias.
    pub fn orthogonal<R: Rng + ?Sized>(rows: usize, cols: usize, gain: f64, rng: &mut R) -> Self {
        let mut layer = Self::zeros(rows, cols);
        // orthonormalize the shorter dimension's vectors with modified Gram-Schmidt
        let (count, len) = if rows <= cols { (rows, cols) } else { (cols, rows) };
        let mut vecs: Vec<Vec<f64>> = Vec::with_capacity(count);
        while vecs.len() < count {
            let mut v: Vec<f64> = (0..len).map(|_| rng.sample(StandardNormal)).collect();
            for u in &vecs {
                let d: f64 = v.iter().zip(u).map(|(a, b)| a * b).sum();
                v.iter_mut().zip(u).for_each(|(a, b)| *a -= d * b);
            }
            let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
            if norm > 1e-8 {
                v.iter_mut().for_each(|a| *a /= norm);
                vecs.push(v);
            }
        }
        for r in 0..rows {
            for c in 0..cols {
                let w = if rows <= cols { vecs[r][c] } else { vecs[c][r] };
                layer.weights[r * cols + c] = gain * w;
            }
        }
        layer
    }

    pub fn forward_into(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend(self.weights.chunks_exact(self.cols).zip(&self.bias).map(|(row, b)| {
            row.iter().zip(x).map(|(w, xi)| w * xi).sum::<f64>() + b
        }));
    }

    /// Accumulates parameter gradients for upstream gradient `dy` at input
    /// `x` into `grad`, and writes the input gradient into `dx` if given.
    fn backward(&self, x: &[f64], dy: &[f64], grad: &mut Dense, dx: Option<&mut Vec<f64>>) {
        for (r, &g) in dy.iter().enumerate() {
            if g == 0.0 {
                continue;
            }
            grad.bias[r] += g;
            let row = &mut grad.weights[r * self.cols..(r + 1) * self.cols];
            row.iter_mut().zip(x).for_each(|(w, xi)| *w += g * xi);
        }
        if let Some(dx) = dx {
            dx.clear();
            dx.resize(self.cols, 0.0);
            for (r, &g) in dy.iter().enumerate() {
                if g == 0.0 {
                    continue;
                }
                let row = &self.weights[r * self.cols..(r + 1) * self.cols];
                dx.iter_mut().zip(row).for_each(|(d, w)| *d += g * w);
            }
        }
    }
}

/// Shared two-layer tanh trunk with a logit head and a scalar value head.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyParams {
    pub trunk1: Dense,
    pub trunk2: Dense,
    pub policy_head: Dense,
    pub value_head: Dense,
}

/// Activations kept from a forward pass for backpropagation.
#[derive(Debug, Clone, Default)]
pub struct ForwardCache {
    pub h1: Vec<f64>,
    pub h2: Vec<f64>,
    pub logits: Vec<f64>,
    pub value: f64,
}

impl PolicyParams {
    pub fn zeros(obs_len: usize, hidden: usize, n_actions: usize) -> Self {
        Self {
            trunk1: Dense::zeros(hidden, obs_len),
            trunk2: Dense::zeros(hidden, hidden),
            policy_head: Dense::zeros(n_actions, hidden),
            value_head: Dense::zeros(1, hidden),
        }
    }

    /// Orthogonal init: trunk gain sqrt(2), policy head 0.01, value head 1.
    pub fn init<R: Rng + ?Sized>(obs_len: usize, hidden: usize, n_actions: usize, rng: &mut R) -> Self {
        Self {
            trunk1: Dense::orthogonal(hidden, obs_len, std::f64::consts::SQRT_2, rng),
            trunk2: Dense::orthogonal(hidden, hidden, std::f64::consts::SQRT_2, rng),
            policy_head: Dense::orthogonal(n_actions, hidden, 0.01, rng),
            value_head: Dense::orthogonal(1, hidden, 1.0, rng),
        }
    }

    pub fn obs_len(&self) -> usize {
        self.trunk1.cols
    }

    pub fn hidden(&self) -> usize {
        self.trunk1.rows
    }

    pub fn n_actions(&self) -> usize {
        self.policy_head.rows
    }

    pub fn layers(&self) -> [(&'static str, &Dense); 4] {
        [
            ("trunk1", &self.trunk1),
            ("trunk2", &self.trunk2),
            ("policy_head", &self.policy_head),
            ("value_head", &self.value_head),
        ]
    }

    /// Every parameter tensor in a fixed order (weights then bias per layer).
    pub fn tensors(&self) -> [&Vec<f64>; 8] {
        [
            &self.trunk1.weights,
            &self.trunk1.bias,
            &self.trunk2.weights,
            &self.trunk2.bias,
            &self.policy_head.weights,
            &self.policy_head.bias,
            &self.value_head.weights,
            &self.value_head.bias,
        ]
    }

    pub fn tensors_mut(&mut self) -> [&mut Vec<f64>; 8] {
        [
            &mut self.trunk1.weights,
            &mut self.trunk1.bias,
            &mut self.trunk2.weights,
            &mut self.trunk2.bias,
            &mut self.policy_head.weights,
            &mut self.policy_head.bias,
            &mut self.value_head.weights,
            &mut self.value_head.bias,
        ]
    }

    pub fn num_params(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.obs_len(), self.hidden(), self.n_actions())
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|v| v.is_finite()))
    }

    /// Checks that layer shapes chain together.
    pub fn check_shapes(&self) -> Result<()> {
        let h = self.hidden();
        let ok = self.trunk2.rows == h
            && self.trunk2.cols == h
            && self.policy_head.cols == h
            && self.value_head.cols == h
            && self.value_head.rows == 1
            && self.layers().iter().all(|(_, l)| {
                l.weights.len() == l.rows * l.cols && l.bias.len() == l.rows
            });
        if ok {
            Ok(())
        } else {
            Err(PolicyError::Shape("inconsistent layer shapes".into()))
        }
    }

    pub fn forward_cached(&self, obs: &[f64], cache: &mut ForwardCache) -> Result<()> {
        if obs.len() != self.obs_len() {
            return Err(PolicyError::Shape(format!(
                "observation length {} != network input {}",
                obs.len(),
                self.obs_len()
            )));
        }
        self.trunk1.forward_into(obs, &mut cache.h1);
        cache.h1.iter_mut().for_each(|v| *v = v.tanh());
        self.trunk2.forward_into(&cache.h1, &mut cache.h2);
        cache.h2.iter_mut().for_each(|v| *v = v.tanh());
        self.policy_head.forward_into(&cache.h2, &mut cache.logits);
        let mut value = Vec::with_capacity(1);
        self.value_head.forward_into(&cache.h2, &mut value);
        cache.value = value[0];
        Ok(())
    }

    /// Backpropagates `dlogits` and `dvalue` through the cached forward pass
    /// at `obs`, accumulating into `grad`.
    pub fn backward(
        &self,
        obs: &[f64],
        cache: &ForwardCache,
        dlogits: &[f64],
        dvalue: f64,
        grad: &mut PolicyParams,
        scratch: &mut BackwardScratch,
    ) {
        let BackwardScratch { dh2, dh2_v, dh1 } = scratch;
        self.policy_head
            .backward(&cache.h2, dlogits, &mut grad.policy_head, Some(dh2));
        self.value_head
            .backward(&cache.h2, &[dvalue], &mut grad.value_head, Some(dh2_v));
        dh2.iter_mut()
            .zip(dh2_v.iter())
            .zip(&cache.h2)
            .for_each(|((d, dv), h)| *d = (*d + dv) * (1.0 - h * h));
        self.trunk2.backward(&cache.h1, dh2, &mut grad.trunk2, Some(dh1));
        dh1.iter_mut()
            .zip(&cache.h1)
            .for_each(|(d, h)| *d *= 1.0 - h * h);
        self.trunk1.backward(obs, dh1, &mut grad.trunk1, None);
    }
}

#[derive(Debug, Default)]
pub struct BackwardScratch {
    dh2: Vec<f64>,
    dh2_v: Vec<f64>,
    dh1: Vec<f64>,
}

/// Network evaluation: `(logits, value)`.
pub fn forward(params: &PolicyParams, obs: &[f64]) -> Result<(Vec<f64>, f64)> {
    let mut cache = ForwardCache::default();
    params.forward_cached(obs, &mut cache)?;
    Ok((cache.logits, cache.value))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_network_outputs_zero() {
        let p = PolicyParams::zeros(7, 4, 3);
        let (logits, v) = forward(&p, &[1.0; 7]).unwrap();
        assert_eq!(logits, vec![0.0; 3]);
        assert_eq!(v, 0.0);
    }

    #[test]
    fn hand_built_single_unit_network() {
        // obs (x0, x1) -> h1 = tanh(0.5 x0 - x1 + 0.1) -> h2 = tanh(2 h1 - 0.3)
        let mut p = PolicyParams::zeros(2, 1, 2);
        p.trunk1.weights = vec![0.5, -1.0];
        p.trunk1.bias = vec![0.1];
        p.trunk2.weights = vec![2.0];
        p.trunk2.bias = vec![-0.3];
        p.policy_head.weights = vec![1.5, -0.5];
        p.policy_head.bias = vec![0.0, 0.2];
        p.value_head.weights = vec![3.0];
        p.value_head.bias = vec![-1.0];
        let x = [0.8, 0.2];
        let h1 = (0.5f64 * 0.8 - 0.2 + 0.1).tanh();
        let h2 = (2.0 * h1 - 0.3).tanh();
        let (logits, v) = forward(&p, &x).unwrap();
        assert!((logits[0] - 1.5 * h2).abs() < 1e-15);
        assert!((logits[1] - (-0.5 * h2 + 0.2)).abs() < 1e-15);
        assert!((v - (3.0 * h2 - 1.0)).abs() < 1e-15);
    }

    #[test]
    fn forward_is_deterministic_and_checks_shape() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = PolicyParams::init(5, 8, 3, &mut rng);
        let obs = [0.1, -0.2, 0.3, 0.0, 1.0];
        assert_eq!(forward(&p, &obs).unwrap(), forward(&p, &obs).unwrap());
        assert!(forward(&p, &obs[..4]).is_err());
    }

    #[test]
    fn orthogonal_rows_are_orthonormal() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let l = Dense::orthogonal(4, 9, 1.0, &mut rng);
        for i in 0..4 {
            for j in 0..4 {
                let d: f64 = (0..9).map(|c| l.weights[i * 9 + c] * l.weights[j * 9 + c]).sum();
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((d - want).abs() < 1e-12);
            }
        }
        let tall = Dense::orthogonal(9, 4, 2.0, &mut rng);
        for i in 0..4 {
            let d: f64 = (0..9).map(|r| tall.weights[r * 4 + i].powi(2)).sum();
            assert!((d - 4.0).abs() < 1e-12);
        }
    }
}
