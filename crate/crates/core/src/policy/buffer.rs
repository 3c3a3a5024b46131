use super::gae::compute_gae;

/// On-policy trajectory storage with flat per-step observation and mask rows.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RolloutBuffer {
    pub obs_len: usize,
    pub n_actions: usize,
    pub observations: Vec<f64>,
    pub masks: Vec<bool>,
    pub actions: Vec<usize>,
    pub log_probs: Vec<f64>,
    pub rewards: Vec<f64>,
    pub values: Vec<f64>,
    pub dones: Vec<bool>,
    pub advantages: Vec<f64>,
    pub returns: Vec<f64>,
}

impl RolloutBuffer {
    pub fn new(obs_len: usize, n_actions: usize) -> Self {
        Self {
            obs_len,
            n_actions,
            ..Default::default()
        }
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn clear(&mut self) {
        let (obs_len, n_actions) = (self.obs_len, self.n_actions);
        *self = Self::new(obs_len, n_actions);
    }

    #[allow(clippy::too_many_arguments)]
    pub fn push(
        &mut self,
        obs: &[f64],
        mask: &[bool],
        action: usize,
        log_prob: f64,
        reward: f64,
        value: f64,
        done: bool,
    ) {
        debug_assert_eq!(obs.len(), self.obs_len);
        debug_assert_eq!(mask.len(), self.n_actions);
        debug_assert!(mask[action]);
        self.observations.extend_from_slice(obs);
        self.masks.extend_from_slice(mask);
        self.actions.push(action);
        self.log_probs.push(log_prob);
        self.rewards.push(reward);
        self.values.push(value);
        self.dones.push(done);
    }

    pub fn obs(&self, i: usize) -> &[f64] {
        &self.observations[i * self.obs_len..(i + 1) * self.obs_len]
    }

    pub fn mask(&self, i: usize) -> &[bool] {
        &self.masks[i * self.n_actions..(i + 1) * self.n_actions]
    }

    /// Fills `advantages` and `returns` by GAE.
    pub fn finish(&mut self, last_value: f64, gamma: f64, lambda: f64) {
        let (adv, ret) = compute_gae(
            &self.rewards,
            &self.values,
            &self.dones,
            last_value,
            gamma,
            lambda,
        );
        self.advantages = adv;
        self.returns = ret;
    }

    /// Rescales advantages to zero mean and unit variance.
    pub fn normalize_advantages(&mut self) {
        let n = self.advantages.len();
        if n < 2 {
            return;
        }
        let mean = self.advantages.iter().sum::<f64>() / n as f64;
        let var = self.advantages.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / n as f64;
        let std = var.sqrt() + 1e-8;
        self.advantages.iter_mut().for_each(|a| *a = (*a - mean) / std);
    }
}
