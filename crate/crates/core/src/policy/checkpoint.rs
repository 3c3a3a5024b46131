use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::network::{Dense, PolicyParams};
use super::train::PpoConfig;
use super::{PolicyError, Result};

pub const CHECKPOINT_FORMAT: &str = "adr-ppo-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerRecord {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    /// Row-major, `rows * cols` entries.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

/// JSON container for trained weights and the config that produced them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub obs_len: usize,
    pub n_actions: usize,
    pub hidden: usize,
    pub layers: Vec<LayerRecord>,
    pub ppo_config: PpoConfig,
}

impl Checkpoint {
    pub fn new(params: &PolicyParams, config: &PpoConfig) -> Self {
        Self {
            format: CHECKPOINT_FORMAT.into(),
            version: CHECKPOINT_VERSION,
            obs_len: params.obs_len(),
            n_actions: params.n_actions(),
            hidden: params.hidden(),
            layers: params
                .layers()
                .iter()
                .map(|(name, l)| LayerRecord {
                    name: (*name).into(),
                    rows: l.rows,
                    cols: l.cols,
                    weights: l.weights.clone(),
                    bias: l.bias.clone(),
                })
                .collect(),
            ppo_config: config.clone(),
        }
    }

    pub fn params(&self) -> Result<PolicyParams> {
        let bad = |m: String| Err(PolicyError::Checkpoint(m));
        if self.format != CHECKPOINT_FORMAT {
            return bad(format!("unknown format {:?}", self.format));
        }
        if self.version != CHECKPOINT_VERSION {
            return bad(format!("unsupported version {}", self.version));
        }
        let expected = [
            ("trunk1", self.hidden, self.obs_len),
            ("trunk2", self.hidden, self.hidden),
            ("policy_head", self.n_actions, self.hidden),
            ("value_head", 1, self.hidden),
        ];
        if self.layers.len() != expected.len() {
            return bad(format!("expected 4 layers, found {}", self.layers.len()));
        }
        let mut dense = Vec::with_capacity(4);
        for (rec, (name, rows, cols)) in self.layers.iter().zip(expected) {
            if rec.name != name || rec.rows != rows || rec.cols != cols {
                return bad(format!(
                    "layer {} is {}x{}, expected {name} {rows}x{cols}",
                    rec.name, rec.rows, rec.cols
                ));
            }
            if rec.weights.len() != rows * cols || rec.bias.len() != rows {
                return bad(format!("layer {name} has wrong array lengths"));
            }
            dense.push(Dense {
                rows,
                cols,
                weights: rec.weights.clone(),
                bias: rec.bias.clone(),
            });
        }
        let mut it = dense.into_iter();
        let params = PolicyParams {
            trunk1: it.next().unwrap(),
            trunk2: it.next().unwrap(),
            policy_head: it.next().unwrap(),
            value_head: it.next().unwrap(),
        };
        if !params.is_finite() {
            return bad("non-finite weights".into());
        }
        Ok(params)
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

pub fn save_checkpoint(path: &Path, params: &PolicyParams, config: &PpoConfig) -> Result<()> {
    let text = Checkpoint::new(params, config).to_json()?;
    fs::write(path, text).map_err(|e| PolicyError::Io {
        path: path.display().to_string(),
        source: e,
    })
}

/// Loads a checkpoint; when `expect` is given as `(obs_len, n_actions)` the
/// network must match it.
pub fn load_checkpoint(
    path: &Path,
    expect: Option<(usize, usize)>,
) -> Result<(PolicyParams, PpoConfig)> {
    let text = fs::read_to_string(path).map_err(|e| PolicyError::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    let ckpt = Checkpoint::from_json(&text)?;
    let params = ckpt.params()?;
    if let Some((obs_len, n_actions)) = expect {
        if params.obs_len() != obs_len || params.n_actions() != n_actions {
            return Err(PolicyError::Checkpoint(format!(
                "network expects {} inputs / {} actions, environment has {obs_len} / {n_actions}",
                params.obs_len(),
                params.n_actions()
            )));
        }
    }
    Ok((params, ckpt.ppo_config))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn checkpoint_roundtrip_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let p = PolicyParams::init(14, 6, 3, &mut rng);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.json");
        save_checkpoint(&path, &p, &PpoConfig::desk()).unwrap();
        let (back, cfg) = load_checkpoint(&path, Some((14, 3))).unwrap();
        assert_eq!(back, p);
        assert_eq!(cfg, PpoConfig::desk());
    }

    #[test]
    fn shape_mismatch_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let p = PolicyParams::init(14, 6, 3, &mut rng);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.json");
        save_checkpoint(&path, &p, &PpoConfig::desk()).unwrap();
        assert!(load_checkpoint(&path, Some((19, 3))).is_err());

        let mut ckpt = Checkpoint::new(&p, &PpoConfig::desk());
        ckpt.layers[1].cols = 5;
        assert!(matches!(ckpt.params(), Err(PolicyError::Checkpoint(_))));
        let mut ckpt = Checkpoint::new(&p, &PpoConfig::desk());
        ckpt.layers[0].weights.pop();
        assert!(ckpt.params().is_err());
    }
}
