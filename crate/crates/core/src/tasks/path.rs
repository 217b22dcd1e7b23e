//! Single-source single-target path finding on an undirected graph.

use super::graph::{Graph, DEFAULT_DEGREES};
use super::{gen_failure, reward, too_small, unary, EnvMode, Environment, StepOutcome, TaskError, TaskKind};
use crate::rng::{derive, derive_index};
use crate::tensor::PredTensor;
use alloc::vec;
use alloc::vec::Vec;
use rand::Rng;

/// Largest start/target distance during training.
pub const TRAIN_MAX_DISTANCE: usize = 5;
/// Exact start/target distance during evaluation.
pub const EVAL_DISTANCE: usize = 4;
const MAX_TRIES: usize = 10_000;

/// The agent names the next node; it moves there iff an edge exists. The
/// step limit is the shortest start/target distance.
#[derive(Debug, Clone, PartialEq)]
pub struct PathEnv {
    pub graph: Graph,
    pub current: usize,
    pub target: usize,
    distance: usize,
    mode: EnvMode,
    steps: usize,
}

impl PathEnv {
    /// Builds an instance from explicit parts. `None` if the target is
    /// unreachable or equals the start.
    pub fn new(graph: Graph, start: usize, target: usize) -> Option<Self> {
        let distance = graph.bfs(start)[target].filter(|&d| d > 0)?;
        Some(Self { graph, current: start, target, distance, mode: EnvMode::Train, steps: 0 })
    }

    /// Rejection-samples graph, start and target until the distance fits the
    /// mode: `1..=5` for training, exactly `4` for evaluation.
    pub fn generate(m: usize, seed: u64, mode: EnvMode) -> Result<Self, TaskError> {
        let min = if mode == EnvMode::Eval { EVAL_DISTANCE + 1 } else { 2 };
        too_small(TaskKind::Path, m, min)?;
        let base = derive(seed, "path");
        for attempt in 0..MAX_TRIES {
            let s = derive_index(base, attempt as u64);
            let graph = Graph::generate(m, DEFAULT_DEGREES, s, true)?;
            let mut rng = crate::rng::rng_from(derive(s, "endpoints"));
            let start = rng.random_range(0..m);
            let dist = graph.bfs(start);
            let ok = |d: usize| match mode {
                EnvMode::Train => (1..=TRAIN_MAX_DISTANCE).contains(&d),
                EnvMode::Eval => d == EVAL_DISTANCE,
            };
            let candidates: Vec<usize> = (0..m).filter(|&t| dist[t].is_some_and(ok)).collect();
            if candidates.is_empty() {
                continue;
            }
            let target = candidates[rng.random_range(0..candidates.len())];
            let mut env = Self::new(graph, start, target).expect("target reachable");
            env.mode = mode;
            return Ok(env);
        }
        Err(gen_failure("no start/target pair at the required distance", MAX_TRIES))
    }

    pub fn distance(&self) -> usize {
        self.distance
    }

    /// Node `i` becomes node `pi[i]`.
    pub fn relabel(&self, pi: &[usize]) -> Self {
        Self { graph: self.graph.relabel(pi), current: pi[self.current], target: pi[self.target], ..self.clone() }
    }
}

impl Environment for PathEnv {
    fn reset(&mut self, seed: u64) -> Result<(), TaskError> {
        *self = Self::generate(self.graph.m, seed, self.mode)?;
        Ok(())
    }

    fn num_objects(&self) -> usize {
        self.graph.m
    }

    /// `HasEdge` plus unary `IsStart` (the current node) and `IsTarget`.
    fn observe(&self) -> Vec<PredTensor> {
        let m = self.graph.m;
        let flags: Vec<Vec<bool>> = (0..m).map(|i| vec![i == self.current, i == self.target]).collect();
        vec![PredTensor::zeros(0, m, 0), unary(&flags), self.graph.has_edge().to_tensor()]
    }

    fn num_actions(&self) -> usize {
        self.graph.m
    }

    fn applies(&self, action: usize) -> bool {
        action < self.graph.m && self.graph.edges[self.current][action]
    }

    fn step(&mut self, action: usize) -> Result<StepOutcome, TaskError> {
        if self.is_done() {
            return Err(TaskError::Finished);
        }
        if action >= self.graph.m {
            return Err(TaskError::BadAction { action, actions: self.graph.m });
        }
        let applied = self.applies(action);
        if applied {
            self.current = action;
        }
        self.steps += 1;
        let solved = self.is_solved();
        Ok(StepOutcome { reward: reward(solved), applied, solved, done: self.is_done() })
    }

    fn is_solved(&self) -> bool {
        self.current == self.target
    }

    fn steps_taken(&self) -> usize {
        self.steps
    }

    fn step_limit(&self) -> usize {
        self.distance
    }
}
