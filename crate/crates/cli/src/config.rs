//! Run configuration file: optional `[scenario]`, `[mcts]` and `[ppo]`
//! tables layered between the built-in presets and command-line flags.

use std::path::{Path, PathBuf};

use adr_core::env::{MissionConfig, ScenarioFile};
use adr_core::mcts::MctsConfig;
use adr_core::policy::PpoConfig;
use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

/// Environment variable naming a default config file.
pub const CONFIG_ENV_VAR: &str = "ADR_PLANNER_CONFIG";

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MctsOverrides {
    pub simulations_per_step: Option<usize>,
    pub c_uct: Option<f64>,
    pub rollout_depth: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PpoOverrides {
    pub learning_rate: Option<f64>,
    pub clip_epsilon: Option<f64>,
    pub gamma: Option<f64>,
    pub gae_lambda: Option<f64>,
    pub batch_size: Option<usize>,
    pub minibatch_size: Option<usize>,
    pub epochs_per_update: Option<usize>,
    pub value_coef: Option<f64>,
    pub entropy_coef: Option<f64>,
    pub max_grad_norm: Option<f64>,
    pub hidden: Option<usize>,
    pub total_timesteps: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub scenario: ScenarioFile,
    #[serde(default)]
    pub mcts: MctsOverrides,
    #[serde(default)]
    pub ppo: PpoOverrides,
}

macro_rules! overlay {
    ($dst:expr, $src:expr, $($field:ident),+) => {
        $(if let Some(v) = $src.$field { $dst.$field = v; })+
    };
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| anyhow::anyhow!("{}", e.message()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("invalid config {}", path.display()))
    }

    /// `--config` if given, else the file named by [`CONFIG_ENV_VAR`], else
    /// the empty config.
    pub fn resolve(flag: Option<&Path>) -> Result<(Self, Option<PathBuf>)> {
        let path = flag
            .map(Path::to_path_buf)
            .or_else(|| std::env::var_os(CONFIG_ENV_VAR).map(PathBuf::from));
        match path {
            Some(p) => Ok((Self::load(&p)?, Some(p))),
            None => Ok((Self::default(), None)),
        }
    }

    pub fn mission(&self, base: &MissionConfig) -> Result<MissionConfig> {
        Ok(self.scenario.apply(base)?)
    }

    pub fn mcts(&self, mut base: MctsConfig) -> MctsConfig {
        overlay!(base, self.mcts, simulations_per_step, c_uct, rollout_depth);
        base
    }

    pub fn ppo(&self, mut base: PpoConfig) -> PpoConfig {
        overlay!(
            base,
            self.ppo,
            learning_rate,
            clip_epsilon,
            gamma,
            gae_lambda,
            batch_size,
            minibatch_size,
            epochs_per_update,
            value_coef,
            entropy_coef,
            max_grad_norm,
            hidden,
            total_timesteps
        );
        base
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layered_values() {
        let cfg = RunConfig::parse(
            "[scenario]\ndv_max_kms = 2.0\n[mcts]\nc_uct = 0.5\n[ppo]\nhidden = 32\n",
        )
        .unwrap();
        let m = cfg.mission(&MissionConfig::nominal()).unwrap();
        assert_eq!(m.dv_max, 2.0);
        assert_eq!(m.mission_days(), 7.0);
        let mc = cfg.mcts(MctsConfig::default());
        assert_eq!((mc.c_uct, mc.simulations_per_step), (0.5, 200));
        assert_eq!(cfg.ppo(PpoConfig::desk()).hidden, 32);
    }

    #[test]
    fn unknown_keys_are_named() {
        let err = RunConfig::parse("[mcts]\nsimulations = 5\n").unwrap_err();
        assert!(err.to_string().contains("simulations"), "{err}");
        let err = RunConfig::parse("[scenario]\ndv_max = 5\n").unwrap_err();
        assert!(err.to_string().contains("dv_max"), "{err}");
        let err = RunConfig::parse("[extra]\n").unwrap_err();
        assert!(err.to_string().contains("extra"), "{err}");
    }
}
