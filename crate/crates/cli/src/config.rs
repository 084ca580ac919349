//! TOML experiment configuration shared by all subcommands.

use std::path::Path;

use ailab_core::demos::{NoiseKind, NoiseSpec};
use ailab_core::gridworld::{parse_gridworld, parse_mdp_text};
use ailab_core::trainer::{Method, ScorerKind, TrainConfig};
use ailab_core::TabularMdp;
use serde::Deserialize;

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub env: EnvSection,
    pub demo: DemoSection,
    pub train: TrainSection,
    #[serde(default)]
    pub sweep: Option<SweepSection>,
    #[serde(default = "default_output_dir")]
    pub output_dir: String,
}

fn default_output_dir() -> String {
    "out".to_string()
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvSection {
    /// Inline gridworld layout; mutually exclusive with `mdp_file`.
    pub layout: Option<String>,
    /// Path to an explicit-tensor MDP file, relative to the config file.
    pub mdp_file: Option<String>,
    #[serde(default = "default_slip")]
    pub slip: f64,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
}

fn default_slip() -> f64 {
    0.1
}

fn default_gamma() -> f64 {
    0.95
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DemoSection {
    /// "action_noise" (D2) or "checkpoint" (D1).
    #[serde(default = "default_demo_kind")]
    pub kind: String,
    pub levels: Vec<f64>,
    #[serde(default = "default_n_per_policy")]
    pub n_per_policy: usize,
    #[serde(default = "default_demo_horizon")]
    pub horizon: usize,
    #[serde(default = "default_demo_seed")]
    pub seed: u64,
    #[serde(default = "default_demo_file")]
    pub file: String,
}

fn default_demo_kind() -> String {
    "action_noise".to_string()
}

fn default_n_per_policy() -> usize {
    250
}

fn default_demo_horizon() -> usize {
    100
}

fn default_demo_seed() -> u64 {
    7
}

fn default_demo_file() -> String {
    "demos.txt".to_string()
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSection {
    #[serde(default = "default_method")]
    pub method: String,
    pub alpha: Option<f64>,
    pub seed: Option<u64>,
    pub iters: Option<usize>,
    pub lambda_gp: Option<f64>,
    pub disc_steps_per_iter: Option<usize>,
    pub policy_steps_per_iter: Option<usize>,
    pub batch_size: Option<usize>,
    pub lr_disc: Option<f64>,
    pub lr_policy: Option<f64>,
    pub lr_decay: Option<f64>,
    pub rollout_per_iter: Option<usize>,
    pub horizon: Option<usize>,
    pub entropy_bonus: Option<f64>,
    pub mlp_hidden: Option<usize>,
}

fn default_method() -> String {
    "uid_gail".to_string()
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub methods: Vec<String>,
    pub alphas: Vec<f64>,
    pub ratio_optimal: Vec<f64>,
    pub seeds: Vec<u64>,
}

impl ExperimentConfig {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let cfg: ExperimentConfig =
            toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        match (&self.env.layout, &self.env.mdp_file) {
            (Some(_), Some(_)) | (None, None) => {
                return Err(CliError::Config(
                    "env needs exactly one of `layout` or `mdp_file`".into(),
                ))
            }
            _ => {}
        }
        if self.demo.levels.is_empty() {
            return Err(CliError::Config("demo.levels must be non-empty".into()));
        }
        Method::from_str(&self.train.method)?;
        for a in self.train.alpha.iter().chain(self.sweep.iter().flat_map(|s| s.alphas.iter())) {
            if !(*a > 0.0 && *a <= 1.0) {
                return Err(CliError::Config(format!("alpha {a} outside (0,1]")));
            }
        }
        if let Some(sweep) = &self.sweep {
            for (name, empty) in [
                ("methods", sweep.methods.is_empty()),
                ("alphas", sweep.alphas.is_empty()),
                ("ratio_optimal", sweep.ratio_optimal.is_empty()),
                ("seeds", sweep.seeds.is_empty()),
            ] {
                if empty {
                    return Err(CliError::Config(format!("sweep.{name} must be non-empty")));
                }
            }
            for m in &sweep.methods {
                Method::from_str(m)?;
            }
        }
        Ok(())
    }

    /// Build the environment; file paths resolve relative to `base_dir`.
    pub fn build_mdp(&self, base_dir: &Path) -> Result<TabularMdp> {
        if let Some(layout) = &self.env.layout {
            return Ok(parse_gridworld(layout, self.env.slip, self.env.gamma)?.mdp);
        }
        let file = self.env.mdp_file.as_ref().expect("validated");
        let path = base_dir.join(file);
        let text = std::fs::read_to_string(&path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Ok(parse_mdp_text(&text)?)
    }

    pub fn noise_spec(&self) -> Result<NoiseSpec> {
        let kind = match self.demo.kind.as_str() {
            "action_noise" => NoiseKind::ActionNoise,
            "checkpoint" => NoiseKind::Checkpoint,
            other => return Err(CliError::Config(format!("unknown demo kind '{other}'"))),
        };
        Ok(NoiseSpec::new(kind, self.demo.levels.clone())?)
    }

    /// Training configuration with optional CLI overrides applied.
    pub fn train_config(
        &self,
        method: Option<&str>,
        alpha: Option<f64>,
        seed: Option<u64>,
    ) -> Result<TrainConfig> {
        let method = Method::from_str(method.unwrap_or(&self.train.method))?;
        let mut cfg = TrainConfig::defaults(method, seed.or(self.train.seed).unwrap_or(1));
        if let Some(a) = alpha.or(self.train.alpha) {
            cfg.alpha = a;
        }
        if let Some(v) = self.train.iters {
            cfg.iters = v;
        }
        if let Some(v) = self.train.lambda_gp {
            cfg.lambda_gp = v;
        }
        if let Some(v) = self.train.disc_steps_per_iter {
            cfg.disc_steps_per_iter = v;
        }
        if let Some(v) = self.train.policy_steps_per_iter {
            cfg.policy_steps_per_iter = v;
        }
        if let Some(v) = self.train.batch_size {
            cfg.batch_size = v;
        }
        if let Some(v) = self.train.lr_disc {
            cfg.lr_disc = v;
        }
        if let Some(v) = self.train.lr_policy {
            cfg.lr_policy = v;
        }
        if let Some(v) = self.train.lr_decay {
            cfg.lr_decay = v;
        }
        if let Some(v) = self.train.rollout_per_iter {
            cfg.rollout_per_iter = v;
        }
        if let Some(v) = self.train.horizon {
            cfg.horizon = v;
        }
        if let Some(v) = self.train.entropy_bonus {
            cfg.entropy_bonus = v;
        }
        if let Some(h) = self.train.mlp_hidden {
            cfg.scorer_kind = ScorerKind::Mlp { hidden_dim: h };
        }
        cfg.validate()?;
        Ok(cfg)
    }
}
