//! Masked PPO from scratch: MLP policy/value network with hand-written
//! backpropagation, masked categorical distribution, GAE and the clipped
//! surrogate objective.

mod buffer;
mod checkpoint;
mod distribution;
mod gae;
mod loss;
mod network;
mod train;

pub use buffer::RolloutBuffer;
pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, LayerRecord};
pub use distribution::{entropy, masked_log_softmax, probabilities, sample_action};
pub use gae::compute_gae;
pub use loss::{
    clipped_surrogate_dlogp, clipped_surrogate_dratio, clipped_surrogate_loss, loss_and_grad,
    LossBreakdown, LossWeights,
};
pub use network::{forward, Dense, ForwardCache, PolicyParams};
pub use train::{
    act, episode_source, train, train_with, update, Adam, PpoConfig, TrainReport, TrainRow,
};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum PolicyError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("empty action mask")]
    EmptyMask,
    #[error("non-finite loss: {0}")]
    NonFiniteLoss(String),
    #[error("could not draw an episode with a feasible first action")]
    NoFeasibleEpisode,
    #[error("invalid PPO config: {0}")]
    Config(String),
    #[error("bad checkpoint: {0}")]
    Checkpoint(String),
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Env(#[from] crate::env::EnvError),
}

impl PartialEq for PolicyError {
    fn eq(&self, other: &Self) -> bool {
        self.to_string() == other.to_string()
    }
}

pub type Result<T> = std::result::Result<T, PolicyError>;
