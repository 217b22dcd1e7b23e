//! Benchmark tasks: generators, premise encoders, label functions and
//! environments.
//!
//! Supervised tasks (family tree, general graph, the blocks-world
//! `ShouldMove` helper) produce [`LabeledInstance`]s. Sequential tasks
//! (sorting, path finding, blocks world) are [`Environment`]s with a fixed
//! reward scheme: `-0.01` per action and `+1.0` on the completing action.

pub mod blocks;
pub mod family;
pub mod graph;
pub mod path;
pub mod sorting;

use crate::logic::{LogicError, Relation};
use crate::model::{HeadConfig, HeadInput, NlmConfig};
use crate::tensor::PredTensor;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use blocks::BlocksEnv;
pub use path::PathEnv;
pub use sorting::SortEnv;

pub const STEP_REWARD: f64 = -0.01;
pub const SUCCESS_REWARD: f64 = 1.0;
pub const GAMMA: f64 = 0.99;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TaskError {
    #[error("unknown task `{0}`")]
    UnknownTask(String),
    #[error("task {task} needs at least {min} objects, got {m}")]
    TooSmall { task: String, m: usize, min: usize },
    #[error("out-degree {k} impossible with {m} nodes")]
    Degree { k: usize, m: usize },
    #[error("action {action} outside the action space of size {actions}")]
    BadAction { action: usize, actions: usize },
    #[error("no preset for task {0}")]
    NoPreset(String),
    #[error("task {0} is not {1}")]
    WrongKind(String, &'static str),
    #[error("episode already finished")]
    Finished,
    #[error("could not generate an instance: {0}")]
    Generation(String),
    #[error(transparent)]
    Logic(#[from] LogicError),
}

/// Every task of the benchmark.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum TaskKind {
    HasFather,
    HasSister,
    IsGrandparent,
    IsUncle,
    IsMGUncle,
    AdjacentToRed,
    Connectivity(usize),
    OutDegree(usize),
    /// Per-object blocks-world helper predicate, supervised.
    ShouldMove,
    Sorting,
    Path,
    BlocksWorld,
}

/// Every task with a row in the model hyper-parameter table.
pub const PRESET_TASKS: [TaskKind; 14] = [
    TaskKind::HasFather,
    TaskKind::HasSister,
    TaskKind::IsGrandparent,
    TaskKind::IsUncle,
    TaskKind::IsMGUncle,
    TaskKind::AdjacentToRed,
    TaskKind::Connectivity(4),
    TaskKind::Connectivity(6),
    TaskKind::OutDegree(1),
    TaskKind::OutDegree(2),
    TaskKind::Sorting,
    TaskKind::Path,
    TaskKind::BlocksWorld,
    TaskKind::ShouldMove,
];

impl fmt::Display for TaskKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TaskKind::HasFather => f.write_str("hasfather"),
            TaskKind::HasSister => f.write_str("hassister"),
            TaskKind::IsGrandparent => f.write_str("isgrandparent"),
            TaskKind::IsUncle => f.write_str("isuncle"),
            TaskKind::IsMGUncle => f.write_str("ismguncle"),
            TaskKind::AdjacentToRed => f.write_str("adjacenttored"),
            TaskKind::Connectivity(k) => write!(f, "{k}-connectivity"),
            TaskKind::OutDegree(k) => write!(f, "{k}-outdegree"),
            TaskKind::ShouldMove => f.write_str("shouldmove"),
            TaskKind::Sorting => f.write_str("sorting"),
            TaskKind::Path => f.write_str("path"),
            TaskKind::BlocksWorld => f.write_str("blocksworld"),
        }
    }
}

impl FromStr for TaskKind {
    type Err = TaskError;

    fn from_str(s: &str) -> Result<Self, TaskError> {
        let lower = s.to_ascii_lowercase().replace('_', "-");
        let kind = match lower.as_str() {
            "hasfather" => TaskKind::HasFather,
            "hassister" => TaskKind::HasSister,
            "isgrandparent" => TaskKind::IsGrandparent,
            "isuncle" => TaskKind::IsUncle,
            "ismguncle" => TaskKind::IsMGUncle,
            "adjacenttored" => TaskKind::AdjacentToRed,
            "shouldmove" => TaskKind::ShouldMove,
            "sorting" => TaskKind::Sorting,
            "path" => TaskKind::Path,
            "blocksworld" | "blocks-world" | "blocks" => TaskKind::BlocksWorld,
            other => {
                let parsed = other.split_once('-').and_then(|(k, name)| Some((k.parse::<usize>().ok()?, name)));
                match parsed {
                    Some((k, "connectivity")) if k >= 1 => TaskKind::Connectivity(k),
                    Some((k, "outdegree")) => TaskKind::OutDegree(k),
                    _ => return Err(TaskError::UnknownTask(s.into())),
                }
            }
        };
        Ok(kind)
    }
}

impl TryFrom<String> for TaskKind {
    type Error = TaskError;
    fn try_from(s: String) -> Result<Self, TaskError> {
        s.parse()
    }
}

impl From<TaskKind> for String {
    fn from(k: TaskKind) -> String {
        k.to_string()
    }
}

/// Row of the model hyper-parameter table.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelPreset {
    pub depth: usize,
    pub breadth: usize,
    pub residual: bool,
    /// Training budget: examples (supervised) or episodes (sequential).
    pub budget: usize,
}

/// Row of the reinforcement-learning hyper-parameter table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RlPreset {
    pub m_min: usize,
    pub m_max: usize,
    pub beta_init: f64,
    pub omega: f64,
    pub epochs: usize,
    pub train_episodes: usize,
    pub eval_episodes: usize,
}

impl TaskKind {
    pub fn is_supervised(&self) -> bool {
        !matches!(self, TaskKind::Sorting | TaskKind::Path | TaskKind::BlocksWorld)
    }

    /// Fewest objects an instance can have.
    pub fn min_objects(&self) -> usize {
        match self {
            TaskKind::Sorting | TaskKind::Path => 2,
            TaskKind::BlocksWorld | TaskKind::ShouldMove => 1,
            _ => 2,
        }
    }

    pub fn model_preset(&self) -> Result<ModelPreset, TaskError> {
        let p = |depth, breadth, residual, budget| Ok(ModelPreset { depth, breadth, residual, budget });
        match self {
            TaskKind::HasFather | TaskKind::HasSister => p(4, 3, false, 50_000),
            TaskKind::IsGrandparent | TaskKind::IsUncle => p(4, 3, false, 100_000),
            TaskKind::IsMGUncle => p(4, 3, false, 200_000),
            TaskKind::AdjacentToRed => p(4, 3, false, 100_000),
            TaskKind::Connectivity(4) => p(4, 3, false, 50_000),
            TaskKind::Connectivity(6) => p(8, 3, true, 50_000),
            TaskKind::OutDegree(1) => p(4, 3, false, 50_000),
            TaskKind::OutDegree(2) => p(5, 4, true, 100_000),
            TaskKind::Sorting => p(3, 2, true, 1_000),
            TaskKind::Path => p(5, 3, true, 24_000),
            TaskKind::BlocksWorld | TaskKind::ShouldMove => p(7, 2, true, 50_000),
            other => Err(TaskError::NoPreset(other.to_string())),
        }
    }

    pub fn rl_preset(&self) -> Result<RlPreset, TaskError> {
        match self {
            TaskKind::Sorting => Ok(RlPreset {
                m_min: 4,
                m_max: 10,
                beta_init: 0.01,
                omega: 0.5,
                epochs: 5,
                train_episodes: 200,
                eval_episodes: 200,
            }),
            TaskKind::Path => Ok(RlPreset {
                m_min: 3,
                m_max: 12,
                beta_init: 0.1,
                omega: 0.5,
                epochs: 40,
                train_episodes: 600,
                eval_episodes: 3000,
            }),
            TaskKind::BlocksWorld => Ok(RlPreset {
                m_min: 2,
                m_max: 12,
                beta_init: 0.2,
                omega: 0.6,
                epochs: 50,
                train_episodes: 1000,
                eval_episodes: 3000,
            }),
            other => Err(TaskError::WrongKind(other.to_string(), "a sequential task")),
        }
    }

    /// Premise channels per arity, from arity 0 up.
    pub fn input_channels(&self) -> Vec<usize> {
        match self {
            TaskKind::HasFather | TaskKind::HasSister | TaskKind::IsGrandparent | TaskKind::IsUncle | TaskKind::IsMGUncle => {
                vec![0, 0, family::BASE_RELATIONS.len()]
            }
            TaskKind::AdjacentToRed | TaskKind::Connectivity(_) | TaskKind::OutDegree(_) => vec![0, graph::NUM_COLORS, 1],
            TaskKind::ShouldMove | TaskKind::BlocksWorld => vec![0, 0, blocks::RELATIONS.len()],
            TaskKind::Sorting => vec![0, 0, sorting::RELATIONS.len()],
            TaskKind::Path => vec![0, 2, 1],
        }
    }

    /// Arity of the supervised target.
    pub fn label_arity(&self) -> Option<usize> {
        match self {
            TaskKind::HasFather | TaskKind::HasSister | TaskKind::AdjacentToRed | TaskKind::OutDegree(_) | TaskKind::ShouldMove => {
                Some(1)
            }
            TaskKind::IsGrandparent | TaskKind::IsUncle | TaskKind::IsMGUncle | TaskKind::Connectivity(_) => Some(2),
            _ => None,
        }
    }

    pub fn head(&self) -> HeadConfig {
        match self {
            TaskKind::Sorting => HeadConfig::PairAction,
            TaskKind::Path => HeadConfig::ObjectAction,
            TaskKind::BlocksWorld => HeadConfig::BlocksAction { hidden: 8 },
            other => HeadConfig::Classify { arity: other.label_arity().expect("supervised task") },
        }
    }

    /// The preset model configuration for this task.
    pub fn model_config(&self) -> Result<NlmConfig, TaskError> {
        let p = self.model_preset()?;
        Ok(NlmConfig::new(p.depth, p.breadth, p.residual, &self.input_channels(), self.head()))
    }
}

/// A supervised example: premises plus the target grounding.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledInstance {
    pub task: TaskKind,
    pub seed: u64,
    /// Premise groups for arities `0..`, ready for the model.
    pub premises: Vec<PredTensor>,
    pub labels: Relation,
}

impl LabeledInstance {
    pub fn num_objects(&self) -> usize {
        self.labels.num_objects()
    }
}

/// Generates a supervised instance with `m` objects.
pub fn generate_labeled(task: TaskKind, m: usize, seed: u64) -> Result<LabeledInstance, TaskError> {
    let (premises, labels) = match task {
        TaskKind::HasFather | TaskKind::HasSister | TaskKind::IsGrandparent | TaskKind::IsUncle | TaskKind::IsMGUncle => {
            let tree = family::FamilyTree::generate(m, seed)?;
            (tree.premises(), family::labels(&tree, task)?)
        }
        TaskKind::AdjacentToRed | TaskKind::Connectivity(_) | TaskKind::OutDegree(_) => {
            let g = graph::Graph::generate(m, graph::DEFAULT_DEGREES, seed, false)?;
            (g.premises(), graph::labels(&g, task)?)
        }
        TaskKind::ShouldMove => {
            let env = BlocksEnv::generate(m, seed)?;
            (env.observe(), blocks::should_move_labels(&env)?)
        }
        other => return Err(TaskError::WrongKind(other.to_string(), "a supervised task")),
    };
    Ok(LabeledInstance { task, seed, premises, labels })
}

/// Result of one environment step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    pub reward: f64,
    /// The action changed the state.
    pub applied: bool,
    /// The goal was reached by this action.
    pub solved: bool,
    /// The episode is over (solved or out of steps).
    pub done: bool,
}

/// A sequential task instance.
pub trait Environment {
    /// Replaces the instance by a fresh one drawn from `seed`, same size.
    fn reset(&mut self, seed: u64) -> Result<(), TaskError>;
    fn num_objects(&self) -> usize;
    /// Premise groups for arities `0..`.
    fn observe(&self) -> Vec<PredTensor>;
    fn head_input(&self) -> HeadInput {
        HeadInput::None
    }
    /// Size of the action index space (the head's data length).
    fn num_actions(&self) -> usize;
    /// Whether `action` is legal here; illegal actions are no-ops. This is
    /// also the blocks-world auxiliary target. Malformed indices are `false`.
    fn applies(&self, action: usize) -> bool;
    fn step(&mut self, action: usize) -> Result<StepOutcome, TaskError>;
    fn is_solved(&self) -> bool;
    fn steps_taken(&self) -> usize;
    fn step_limit(&self) -> usize;
    fn is_done(&self) -> bool {
        self.is_solved() || self.steps_taken() >= self.step_limit()
    }
}

pub(crate) fn reward(solved: bool) -> f64 {
    if solved {
        STEP_REWARD + SUCCESS_REWARD
    } else {
        STEP_REWARD
    }
}

/// How instances are drawn. Only path finding distinguishes the two: the
/// start/target distance is at most 5 in training and exactly 4 in
/// evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvMode {
    #[default]
    Train,
    Eval,
}

/// Any of the sequential environments.
#[derive(Debug, Clone, PartialEq)]
pub enum RlEnv {
    Sorting(SortEnv),
    Path(PathEnv),
    Blocks(BlocksEnv),
}

impl RlEnv {
    pub fn generate(task: TaskKind, m: usize, seed: u64, mode: EnvMode) -> Result<Self, TaskError> {
        match task {
            TaskKind::Sorting => Ok(RlEnv::Sorting(SortEnv::generate(m, seed)?)),
            TaskKind::Path => Ok(RlEnv::Path(PathEnv::generate(m, seed, mode)?)),
            TaskKind::BlocksWorld => Ok(RlEnv::Blocks(BlocksEnv::generate(m, seed)?)),
            other => Err(TaskError::WrongKind(other.to_string(), "a sequential task")),
        }
    }

    pub fn task(&self) -> TaskKind {
        match self {
            RlEnv::Sorting(_) => TaskKind::Sorting,
            RlEnv::Path(_) => TaskKind::Path,
            RlEnv::Blocks(_) => TaskKind::BlocksWorld,
        }
    }

    /// Size parameter: array length, node count or block count.
    pub fn size(&self) -> usize {
        match self {
            RlEnv::Sorting(e) => e.num_objects(),
            RlEnv::Path(e) => e.num_objects(),
            RlEnv::Blocks(e) => e.num_blocks(),
        }
    }

    fn inner(&self) -> &dyn Environment {
        match self {
            RlEnv::Sorting(e) => e,
            RlEnv::Path(e) => e,
            RlEnv::Blocks(e) => e,
        }
    }

    fn inner_mut(&mut self) -> &mut dyn Environment {
        match self {
            RlEnv::Sorting(e) => e,
            RlEnv::Path(e) => e,
            RlEnv::Blocks(e) => e,
        }
    }
}

impl Environment for RlEnv {
    fn reset(&mut self, seed: u64) -> Result<(), TaskError> {
        self.inner_mut().reset(seed)
    }
    fn num_objects(&self) -> usize {
        self.inner().num_objects()
    }
    fn observe(&self) -> Vec<PredTensor> {
        self.inner().observe()
    }
    fn head_input(&self) -> HeadInput {
        self.inner().head_input()
    }
    fn num_actions(&self) -> usize {
        self.inner().num_actions()
    }
    fn applies(&self, action: usize) -> bool {
        self.inner().applies(action)
    }
    fn step(&mut self, action: usize) -> Result<StepOutcome, TaskError> {
        self.inner_mut().step(action)
    }
    fn is_solved(&self) -> bool {
        self.inner().is_solved()
    }
    fn steps_taken(&self) -> usize {
        self.inner().steps_taken()
    }
    fn step_limit(&self) -> usize {
        self.inner().step_limit()
    }
}

/// One action taken in an episode.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub observation: Vec<PredTensor>,
    pub head_input: HeadInput,
    pub action: usize,
    pub reward: f64,
    /// Per-action legality before the step, when the task trains on it.
    pub legal: Option<Vec<bool>>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Episode {
    pub transitions: Vec<Transition>,
    pub success: bool,
}

impl Episode {
    pub fn rewards(&self) -> Vec<f64> {
        self.transitions.iter().map(|t| t.reward).collect()
    }

    /// Discounted returns `v_t = r_t + gamma * v_{t+1}`.
    pub fn returns(&self, gamma: f64) -> Vec<f64> {
        discounted_returns(&self.rewards(), gamma)
    }
}

pub fn discounted_returns(rewards: &[f64], gamma: f64) -> Vec<f64> {
    let mut out = vec![0.0; rewards.len()];
    let mut acc = 0.0;
    for (t, r) in rewards.iter().enumerate().rev() {
        acc = r + gamma * acc;
        out[t] = acc;
    }
    out
}

/// Three binary channels per integer attribute: `a_x < a_y`, `a_x == a_y`,
/// `a_x > a_y`, over ordered pairs of distinct objects.
pub fn comparison_channels(attributes: &[Vec<i64>]) -> PredTensor {
    let m = attributes.len();
    let k = attributes.first().map_or(0, Vec::len);
    PredTensor::from_fn(2, m, 3 * k, |idx, c| {
        let (a, b) = (attributes[idx[0]][c / 3], attributes[idx[1]][c / 3]);
        let hit = match c % 3 {
            0 => a < b,
            1 => a == b,
            _ => a > b,
        };
        if hit {
            1.0
        } else {
            0.0
        }
    })
}

/// Unary premise from a boolean per object.
pub(crate) fn unary(flags: &[Vec<bool>]) -> PredTensor {
    let m = flags.len();
    let c = flags.first().map_or(0, Vec::len);
    PredTensor::from_fn(1, m, c, |idx, ch| if flags[idx[0]][ch] { 1.0 } else { 0.0 })
}

pub(crate) fn too_small(task: TaskKind, m: usize, min: usize) -> Result<(), TaskError> {
    if m < min {
        Err(TaskError::TooSmall { task: task.to_string(), m, min })
    } else {
        Ok(())
    }
}

pub(crate) fn gen_failure(what: &str, tries: usize) -> TaskError {
    TaskError::Generation(format!("{what} after {tries} attempts"))
}

#[cfg(test)]
mod tests;
