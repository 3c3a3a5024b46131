use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::buffer::RolloutBuffer;
use super::distribution::{masked_log_softmax_into, sample_action};
use super::loss::{loss_and_grad, LossBreakdown, LossWeights};
use super::network::{ForwardCache, PolicyParams};
use super::{PolicyError, Result};
use crate::env::{self, observe_into, Action, MissionConfig, MissionState};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PpoConfig {
    pub learning_rate: f64,
    pub clip_epsilon: f64,
    pub gamma: f64,
    pub gae_lambda: f64,
    /// Environment steps collected per update.
    pub batch_size: usize,
    pub minibatch_size: usize,
    pub epochs_per_update: usize,
    pub value_coef: f64,
    pub entropy_coef: f64,
    /// Global gradient-norm clip; non-positive disables it.
    pub max_grad_norm: f64,
    pub hidden: usize,
    pub total_timesteps: usize,
    pub domain_randomized: bool,
    pub seed: u64,
}

impl Default for PpoConfig {
    fn default() -> Self {
        Self {
            learning_rate: 3e-5,
            clip_epsilon: 0.2,
            gamma: 0.99,
            gae_lambda: 0.95,
            batch_size: 2048,
            minibatch_size: 256,
            epochs_per_update: 10,
            value_coef: 0.5,
            entropy_coef: 0.01,
            max_grad_norm: 0.5,
            hidden: 256,
            total_timesteps: 1_000_000,
            domain_randomized: false,
            seed: 0,
        }
    }
}

impl PpoConfig {
    /// Full-size nominal run: 256-wide trunk, 1M steps, lr 3e-5.
    pub fn paper_nominal() -> Self {
        Self::default()
    }

    /// Full-size domain-randomized run: 5.5M steps.
    pub fn paper_randomized() -> Self {
        Self {
            total_timesteps: 5_500_000,
            domain_randomized: true,
            ..Self::default()
        }
    }

    /// The alternative 5e-6 learning rate.
    pub fn with_low_learning_rate(self) -> Self {
        Self {
            learning_rate: 5e-6,
            ..self
        }
    }

    /// Small network and budget that train in minutes on a laptop CPU.
    pub fn desk() -> Self {
        Self {
            learning_rate: 3e-4,
            hidden: 64,
            total_timesteps: 100_000,
            ..Self::default()
        }
    }

    pub fn loss_weights(&self) -> LossWeights {
        LossWeights {
            clip_epsilon: self.clip_epsilon,
            value_coef: self.value_coef,
            entropy_coef: self.entropy_coef,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(PolicyError::Config(m.to_string()));
        if !(self.clip_epsilon > 0.0 && self.clip_epsilon < 1.0) {
            return bad("clip_epsilon must be in (0, 1)");
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return bad("gamma must be in (0, 1]");
        }
        if !(0.0..=1.0).contains(&self.gae_lambda) {
            return bad("gae_lambda must be in [0, 1]");
        }
        if self.batch_size == 0 || self.minibatch_size == 0 {
            return bad("batch_size and minibatch_size must be >= 1");
        }
        if self.hidden == 0 {
            return bad("hidden must be >= 1");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        Ok(())
    }
}

/// Adam with the bias-corrected moment estimates.
#[derive(Debug, Clone)]
pub struct Adam {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    t: i32,
    m: PolicyParams,
    v: PolicyParams,
}

impl Adam {
    pub fn new(like: &PolicyParams, lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-5,
            t: 0,
            m: like.zeros_like(),
            v: like.zeros_like(),
        }
    }

    pub fn step(&mut self, params: &mut PolicyParams, grad: &PolicyParams) {
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t);
        let bc2 = 1.0 - self.beta2.powi(self.t);
        let (b1, b2, lr, eps) = (self.beta1, self.beta2, self.lr, self.eps);
        let params_t = params.tensors_mut();
        let m_t = self.m.tensors_mut();
        let v_t = self.v.tensors_mut();
        let g_t = grad.tensors();
        for (((p, m), v), g) in params_t.into_iter().zip(m_t).zip(v_t).zip(g_t) {
            for i in 0..p.len() {
                m[i] = b1 * m[i] + (1.0 - b1) * g[i];
                v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
                let mh = m[i] / bc1;
                let vh = v[i] / bc2;
                p[i] -= lr * mh / (vh.sqrt() + eps);
            }
        }
    }
}

fn grad_norm(grad: &PolicyParams) -> f64 {
    grad.tensors()
        .iter()
        .flat_map(|t| t.iter())
        .map(|g| g * g)
        .sum::<f64>()
        .sqrt()
}

fn scale(grad: &mut PolicyParams, k: f64) {
    for t in grad.tensors_mut() {
        t.iter_mut().for_each(|g| *g *= k);
    }
}

fn zero(grad: &mut PolicyParams) {
    for t in grad.tensors_mut() {
        t.iter_mut().for_each(|g| *g = 0.0);
    }
}

/// One row of the training log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainRow {
    pub update: usize,
    pub steps: usize,
    pub mean_return: f64,
    pub mean_length: f64,
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub seconds: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub rows: Vec<TrainRow>,
}

impl TrainReport {
    pub const CSV_HEADER: &'static str =
        "update,steps,mean_return,mean_length,policy_loss,value_loss,entropy,seconds";

    pub fn to_csv(&self) -> String {
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                r.update,
                r.steps,
                r.mean_return,
                r.mean_length,
                r.policy_loss,
                r.value_loss,
                r.entropy,
                r.seconds
            ));
        }
        out
    }
}

/// Runs `epochs_per_update` passes of shuffled minibatch Adam steps over a
/// finished buffer (advantages already computed). Returns the mean loss
/// components of the final epoch.
pub fn update<R: Rng + ?Sized>(
    params: &mut PolicyParams,
    buffer: &RolloutBuffer,
    config: &PpoConfig,
    optimizer: &mut Adam,
    rng: &mut R,
) -> Result<LossBreakdown> {
    let weights = config.loss_weights();
    let mut grad = params.zeros_like();
    let mut indices: Vec<usize> = (0..buffer.len()).collect();
    let mut last = LossBreakdown::default();
    for _ in 0..config.epochs_per_update {
        indices.shuffle(rng);
        let mut acc = LossBreakdown::default();
        let mut batches = 0.0;
        for chunk in indices.chunks(config.minibatch_size) {
            zero(&mut grad);
            let l = loss_and_grad(params, buffer, chunk, &weights, Some(&mut grad))?;
            let norm = grad_norm(&grad);
            if !norm.is_finite() {
                return Err(PolicyError::NonFiniteLoss(format!("gradient norm {norm}")));
            }
            if config.max_grad_norm > 0.0 && norm > config.max_grad_norm {
                scale(&mut grad, config.max_grad_norm / norm);
            }
            optimizer.step(params, &grad);
            acc.total += l.total;
            acc.policy += l.policy;
            acc.value += l.value;
            acc.entropy += l.entropy;
            acc.clip_fraction += l.clip_fraction;
            batches += 1.0;
        }
        if batches > 0.0 {
            last = LossBreakdown {
                total: acc.total / batches,
                policy: acc.policy / batches,
                value: acc.value / batches,
                entropy: acc.entropy / batches,
                clip_fraction: acc.clip_fraction / batches,
            };
        }
    }
    Ok(last)
}

// Attempts at drawing an episode whose initial state has a feasible action.
const MAX_EMPTY_EPISODES: usize = 10_000;

/// Episode generator for training: fresh debris field per episode, and a
/// freshly randomized budget when `domain_randomized`.
pub fn episode_source(
    base: MissionConfig,
    domain_randomized: bool,
) -> impl FnMut(&mut ChaCha8Rng) -> MissionState {
    move |rng| {
        let cfg = if domain_randomized {
            env::randomize_mission_config_from(&base, rng)
        } else {
            base.clone()
        };
        env::reset(&cfg, rng.gen())
    }
}

fn fresh_episode<F>(make_episode: &mut F, rng: &mut ChaCha8Rng) -> Result<MissionState>
where
    F: FnMut(&mut ChaCha8Rng) -> MissionState,
{
    for _ in 0..MAX_EMPTY_EPISODES {
        let s = make_episode(rng);
        if !env::is_terminal(&s).0 {
            return Ok(s);
        }
    }
    Err(PolicyError::NoFeasibleEpisode)
}

/// Masked PPO on episodes drawn from `base` (randomized per episode when
/// `config.domain_randomized`).
pub fn train(base: &MissionConfig, config: &PpoConfig) -> Result<(PolicyParams, TrainReport)> {
    train_with(
        base.observation_len(),
        base.n_actions(),
        episode_source(base.clone(), config.domain_randomized),
        config,
    )
}

/// Masked PPO over episodes produced by `make_episode`. Bitwise reproducible
/// for a fixed seed.
pub fn train_with<F>(
    obs_len: usize,
    n_actions: usize,
    mut make_episode: F,
    config: &PpoConfig,
) -> Result<(PolicyParams, TrainReport)>
where
    F: FnMut(&mut ChaCha8Rng) -> MissionState,
{
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut params = PolicyParams::init(obs_len, config.hidden, n_actions, &mut rng);
    let mut report = TrainReport::default();
    if config.total_timesteps == 0 {
        return Ok((params, report));
    }
    let mut optimizer = Adam::new(&params, config.learning_rate);
    let mut buffer = RolloutBuffer::new(obs_len, n_actions);
    let mut cache = ForwardCache::default();
    let mut obs = Vec::with_capacity(obs_len);
    let mut mask = Vec::with_capacity(n_actions);
    let mut log_probs = Vec::with_capacity(n_actions);

    let mut state = fresh_episode(&mut make_episode, &mut rng)?;
    let (mut ep_return, mut ep_len) = (0.0, 0usize);
    let mut steps = 0;
    while steps < config.total_timesteps {
        let started = Instant::now();
        let n = config.batch_size.min(config.total_timesteps - steps);
        buffer.clear();
        let (mut finished_returns, mut finished_lengths) = (Vec::new(), Vec::new());
        for _ in 0..n {
            observe_into(&state, &mut obs);
            if obs.len() != obs_len {
                return Err(PolicyError::Shape(format!(
                    "episode observation length {} != {obs_len}",
                    obs.len()
                )));
            }
            state.fill_mask(&mut mask);
            params.forward_cached(&obs, &mut cache)?;
            masked_log_softmax_into(&cache.logits, &mask, &mut log_probs)?;
            let (a, logp) = sample_action(&log_probs, &mut rng, false);
            let action = Action::from_index(a, state.n_debris())?;
            let t = state.apply(action)?;
            ep_return += t.reward;
            ep_len += 1;
            buffer.push(&obs, &mask, a, logp, t.reward, cache.value, t.terminated);
            if t.terminated {
                finished_returns.push(ep_return);
                finished_lengths.push(ep_len as f64);
                ep_return = 0.0;
                ep_len = 0;
                state = fresh_episode(&mut make_episode, &mut rng)?;
            }
        }
        steps += n;
        let last_value = if *buffer.dones.last().unwrap_or(&true) {
            0.0
        } else {
            observe_into(&state, &mut obs);
            params.forward_cached(&obs, &mut cache)?;
            cache.value
        };
        buffer.finish(last_value, config.gamma, config.gae_lambda);
        buffer.normalize_advantages();
        let losses = update(&mut params, &buffer, config, &mut optimizer, &mut rng)?;
        report.rows.push(TrainRow {
            update: report.rows.len() + 1,
            steps,
            mean_return: mean(&finished_returns),
            mean_length: mean(&finished_lengths),
            policy_loss: losses.policy,
            value_loss: losses.value,
            entropy: losses.entropy,
            seconds: started.elapsed().as_secs_f64(),
        });
    }
    Ok((params, report))
}

fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        f64::NAN
    } else {
        xs.iter().sum::<f64>() / xs.len() as f64
    }
}

/// Fast inference path: forward pass, masked distribution, then a sample
/// (or the argmax when `deterministic`).
pub fn act<R: Rng + ?Sized>(
    params: &PolicyParams,
    obs: &[f64],
    mask: &[bool],
    deterministic: bool,
    rng: &mut R,
) -> Result<usize> {
    let mut cache = ForwardCache::default();
    params.forward_cached(obs, &mut cache)?;
    let mut log_probs = Vec::with_capacity(mask.len());
    masked_log_softmax_into(&cache.logits, mask, &mut log_probs)?;
    Ok(sample_action(&log_probs, rng, deterministic).0)
}
