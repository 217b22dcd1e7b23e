//! Versioned TOML run configuration. Unknown keys are errors; every
//! setting not given falls back to the task's preset.

use crate::{Error, Result};
use nlm_core::autodiff::AdamConfig;
use nlm_core::tasks::TaskKind;
use nlm_core::train::{RlConfig, SupervisedConfig};
use nlm_core::NlmConfig;
use serde::{Deserialize, Serialize};
use std::path::PathBuf;

pub const CONFIG_VERSION: u32 = 1;
/// Training size for supervised tasks when none is configured.
pub const DEFAULT_TRAIN_M: usize = 20;

/// Environment variables that may override paths (and nothing else).
pub const ENV_CHECKPOINT: &str = "NLM_CHECKPOINT";
pub const ENV_LOG: &str = "NLM_LOG";
pub const ENV_DATASET: &str = "NLM_DATASET";

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub depth: Option<usize>,
    pub breadth: Option<usize>,
    pub residual: Option<bool>,
    pub channels: Option<usize>,
    pub mlp_hidden: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SupervisedSection {
    pub train_m: Option<usize>,
    pub max_examples: Option<usize>,
    pub batch_size: Option<usize>,
    pub lr: Option<f64>,
    pub loss_threshold: Option<f64>,
    pub eval_every: Option<usize>,
    pub eval_instances: Option<usize>,
    pub eval_m: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RlSection {
    pub m_min: Option<usize>,
    pub m_max: Option<usize>,
    pub max_epochs: Option<usize>,
    pub episodes_per_epoch: Option<usize>,
    pub exam_episodes: Option<usize>,
    pub exam_lessons: Option<usize>,
    pub threshold_step_permille: Option<u32>,
    pub lr: Option<f64>,
    pub beta: Option<f64>,
    pub beta_final: Option<f64>,
    pub gamma: Option<f64>,
    pub omega: Option<f64>,
    pub aux_weight: Option<f64>,
    pub baseline: Option<bool>,
    pub pool_capacity: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathsSection {
    pub checkpoint: Option<PathBuf>,
    pub log: Option<PathBuf>,
    /// Supervised training reads instances from this dataset file instead
    /// of generating them.
    pub dataset: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalSection {
    #[serde(default)]
    pub m: Vec<usize>,
    #[serde(default = "default_samples")]
    pub samples: usize,
}

fn default_samples() -> usize {
    1000
}

impl Default for EvalSection {
    fn default() -> Self {
        Self { m: Vec::new(), samples: default_samples() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub version: u32,
    pub task: TaskKind,
    #[serde(default)]
    pub seed: u64,
    /// Single worker, no wall-clock values in logs.
    #[serde(default = "yes")]
    pub deterministic: bool,
    /// Also checkpoint every this many log records (0: only on lesson
    /// passes, graduation and at the end).
    #[serde(default)]
    pub checkpoint_every: usize,
    #[serde(default)]
    pub model: ModelSection,
    #[serde(default)]
    pub supervised: Option<SupervisedSection>,
    #[serde(default)]
    pub rl: Option<RlSection>,
    #[serde(default)]
    pub paths: PathsSection,
    #[serde(default)]
    pub eval: EvalSection,
}

/// Trainer settings after presets and overrides are applied.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Trainer {
    Supervised { train_m: usize, config: SupervisedConfig },
    Curriculum { config: RlConfig },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Resolved {
    pub task: TaskKind,
    pub seed: u64,
    pub deterministic: bool,
    pub checkpoint_every: usize,
    pub model: NlmConfig,
    pub trainer: Trainer,
    pub checkpoint: Option<PathBuf>,
    pub log: Option<PathBuf>,
    pub dataset: Option<PathBuf>,
    pub eval: EvalSection,
}

impl Trainer {
    /// Canonical JSON, stored in checkpoints to detect mismatched resumes.
    pub fn canonical(&self) -> String {
        serde_json::to_string(self).expect("serializable")
    }
}

fn field(name: &str, msg: impl std::fmt::Display) -> Error {
    Error::Config(format!("{name}: {msg}"))
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    /// A config that uses every preset of `task`.
    pub fn preset(task: TaskKind) -> Self {
        Self {
            version: CONFIG_VERSION,
            task,
            seed: 0,
            deterministic: true,
            checkpoint_every: 0,
            model: ModelSection::default(),
            supervised: None,
            rl: None,
            paths: PathsSection::default(),
            eval: EvalSection::default(),
        }
    }

    pub fn resolve(&self) -> Result<Resolved> {
        self.resolve_with_env(|k| std::env::var(k).ok())
    }

    pub fn resolve_with_env(&self, env: impl Fn(&str) -> Option<String>) -> Result<Resolved> {
        if self.version != CONFIG_VERSION {
            return Err(field("version", format!("unsupported config version {}, expected {CONFIG_VERSION}", self.version)));
        }
        let task = self.task;
        let mut model = task.model_config().map_err(|e| field("task", e))?;
        let m = &self.model;
        if let Some(v) = m.depth {
            model.depth = v;
        }
        if let Some(v) = m.breadth {
            model.breadth = v;
            model.input_channels.resize(v + 1, 0);
            if task.input_channels().iter().skip(v + 1).any(|&c| c > 0) {
                return Err(field("model.breadth", format!("{task} needs premises of arity above {v}")));
            }
        }
        if let Some(v) = m.residual {
            model.residual = v;
        }
        if let Some(v) = m.channels {
            if v == 0 {
                return Err(field("model.channels", "must be at least 1"));
            }
            model.channels = v;
        }
        model.mlp_hidden = m.mlp_hidden;
        model.validate().map_err(|e| field("model", e))?;

        let trainer = if task.is_supervised() {
            if self.rl.is_some() {
                return Err(field("rl", format!("{task} is trained supervised; use [supervised]")));
            }
            let s = self.supervised.clone().unwrap_or_default();
            let budget = task.model_preset().map_err(|e| field("task", e))?.budget;
            let mut config = SupervisedConfig::new(s.max_examples.unwrap_or(budget));
            config.adam = AdamConfig { lr: s.lr.unwrap_or(config.adam.lr), ..config.adam };
            if let Some(v) = s.batch_size {
                config.batch_size = v;
            }
            if let Some(v) = s.loss_threshold {
                config.loss_threshold = v;
            }
            config.eval_every = s.eval_every.unwrap_or(0);
            config.eval_instances = s.eval_instances.unwrap_or(if config.eval_every > 0 { 10 } else { 0 });
            let train_m = s.train_m.unwrap_or(DEFAULT_TRAIN_M);
            config.eval_m = s.eval_m.unwrap_or(if config.eval_every > 0 { train_m } else { 0 });
            let min = model.breadth.max(task.min_objects());
            if train_m < min {
                return Err(field("supervised.train_m", format!("must be at least {min} for {task}")));
            }
            if config.eval_every > 0 && config.eval_m < min {
                return Err(field("supervised.eval_m", format!("must be at least {min} for {task}")));
            }
            if config.batch_size == 0 {
                return Err(field("supervised.batch_size", "must be at least 1"));
            }
            if !(config.adam.lr > 0.0) {
                return Err(field("supervised.lr", "must be positive"));
            }
            if !(config.loss_threshold >= 0.0) {
                return Err(field("supervised.loss_threshold", "must be non-negative"));
            }
            config.validate().map_err(|e| field("supervised", e))?;
            Trainer::Supervised { train_m, config }
        } else {
            if self.supervised.is_some() {
                return Err(field("supervised", format!("{task} is trained with the curriculum; use [rl]")));
            }
            let s = self.rl.clone().unwrap_or_default();
            let mut c = RlConfig::preset(task).map_err(|e| field("task", e))?;
            macro_rules! set {
                ($($f:ident),*) => { $(if let Some(v) = s.$f { c.$f = v; })* };
            }
            set!(m_min, m_max, max_epochs, episodes_per_epoch, exam_episodes, exam_lessons, threshold_step_permille);
            set!(beta, gamma, omega, aux_weight, baseline, pool_capacity);
            if s.beta_final.is_some() {
                c.beta_final = s.beta_final;
            }
            if let Some(lr) = s.lr {
                c.adam.lr = lr;
            }
            let checks: [(&str, bool, &str); 7] = [
                ("rl.gamma", c.gamma > 0.0 && c.gamma <= 1.0, "must lie in (0, 1]"),
                ("rl.omega", (0.0..=1.0).contains(&c.omega), "must lie in [0, 1]"),
                ("rl.beta", c.beta >= 0.0 && c.beta_final.is_none_or(|b| b >= 0.0), "must be non-negative"),
                ("rl.lr", c.adam.lr > 0.0, "must be positive"),
                ("rl.m_min", c.m_min >= 1 && c.m_min <= c.m_max, "must satisfy 1 <= m_min <= m_max"),
                ("rl.exam_episodes", c.exam_episodes > 0, "must be positive"),
                ("rl.pool_capacity", c.pool_capacity > 0, "must be positive"),
            ];
            for (name, ok, msg) in checks {
                if !ok {
                    return Err(field(name, msg));
                }
            }
            let min = match task {
                TaskKind::Path => 2,
                TaskKind::Sorting => 2,
                _ => 1,
            };
            if c.m_min < min {
                return Err(field("rl.m_min", format!("must be at least {min} for {task}")));
            }
            c.validate().map_err(|e| field("rl", e))?;
            Trainer::Curriculum { config: c }
        };
        if self.eval.samples == 0 && !self.eval.m.is_empty() {
            return Err(field("eval.samples", "must be positive"));
        }
        let path = |var: &str, given: &Option<PathBuf>| env(var).map(PathBuf::from).or_else(|| given.clone());
        Ok(Resolved {
            task,
            seed: self.seed,
            deterministic: self.deterministic,
            checkpoint_every: self.checkpoint_every,
            model,
            trainer,
            checkpoint: path(ENV_CHECKPOINT, &self.paths.checkpoint),
            log: path(ENV_LOG, &self.paths.log),
            dataset: path(ENV_DATASET, &self.paths.dataset),
            eval: self.eval.clone(),
        })
    }
}
