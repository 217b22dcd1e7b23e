use super::rl::{episode_rng, reinforce_update, rollout, Policy, ReinforceTerms};
use super::TrainError;
use crate::autodiff::{Adam, AdamConfig};
use crate::model::Model;
use crate::rng::{derive, derive_index, rng_from};
use crate::tasks::{EnvMode, RlEnv, TaskKind, GAMMA};
use alloc::collections::VecDeque;
use core::ops::ControlFlow;
use alloc::vec;
use alloc::vec::Vec;
use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RlConfig {
    #[serde(default)]
    pub adam: AdamConfig,
    /// Entropy weight at the start of training.
    pub beta: f64,
    /// When set, beta decays linearly to this value over `max_epochs`.
    #[serde(default)]
    pub beta_final: Option<f64>,
    pub gamma: f64,
    /// Probability of drawing a training instance from the positive pool.
    pub omega: f64,
    pub m_min: usize,
    pub m_max: usize,
    /// Training epochs available to the whole curriculum.
    pub max_epochs: usize,
    /// Training episodes between two exams.
    pub episodes_per_epoch: usize,
    pub exam_episodes: usize,
    /// How many of the most recent lessons an exam draws from.
    pub exam_lessons: usize,
    /// Pass-threshold decrement per earlier lesson, in thousandths.
    pub threshold_step_permille: u32,
    pub aux_weight: f64,
    /// Subtract a moving average of episode returns.
    #[serde(default)]
    pub baseline: bool,
    pub pool_capacity: usize,
}

impl RlConfig {
    /// Table settings for a sequential task; one epoch trains on as many
    /// episodes as the table's per-epoch count.
    pub fn preset(task: TaskKind) -> Result<Self, TrainError> {
        let p = task.rl_preset()?;
        Ok(Self {
            adam: AdamConfig::default(),
            beta: p.beta_init,
            beta_final: None,
            gamma: GAMMA,
            omega: p.omega,
            m_min: p.m_min,
            m_max: p.m_max,
            max_epochs: p.epochs,
            episodes_per_epoch: p.train_episodes,
            exam_episodes: p.eval_episodes,
            exam_lessons: 3,
            threshold_step_permille: 5,
            aux_weight: if task == TaskKind::BlocksWorld { 0.1 } else { 0.0 },
            baseline: false,
            pool_capacity: 4 * p.eval_episodes.max(p.train_episodes),
        })
    }

    pub fn validate(&self) -> Result<(), TrainError> {
        let err = |s: &str| Err(TrainError::Config(s.into()));
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return err("gamma must lie in (0, 1]");
        }
        if !(0.0..=1.0).contains(&self.omega) {
            return err("omega must lie in [0, 1]");
        }
        if !(self.beta >= 0.0) || self.beta_final.is_some_and(|b| !(b >= 0.0)) {
            return err("beta must be non-negative");
        }
        if !(self.adam.lr > 0.0) {
            return err("learning rate must be positive");
        }
        if self.m_min > self.m_max || self.m_min == 0 {
            return err("lesson range must satisfy 1 <= m_min <= m_max");
        }
        if self.exam_episodes == 0 || self.exam_lessons == 0 || self.pool_capacity == 0 {
            return err("exam size, exam window and pool capacity must be positive");
        }
        if self.threshold_step_permille as usize * (self.m_max - self.m_min) > 1000 {
            return err("threshold decrements fall below zero");
        }
        Ok(())
    }

    pub fn beta_at(&self, epoch: usize) -> f64 {
        match self.beta_final {
            Some(end) if self.max_epochs > 0 => {
                let f = (epoch as f64 / self.max_epochs as f64).min(1.0);
                self.beta + (end - self.beta) * f
            }
            _ => self.beta,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Lesson {
    pub index: usize,
    pub m: usize,
    /// Pass threshold in thousandths: 1000 for the last lesson, minus the
    /// step for each lesson after this one.
    pub threshold_permille: u32,
}

impl Lesson {
    pub fn threshold(&self) -> f64 {
        f64::from(self.threshold_permille) / 1000.0
    }

    /// `successes / total >= threshold`, exactly.
    pub fn passes(&self, successes: usize, total: usize) -> bool {
        successes as u64 * 1000 >= u64::from(self.threshold_permille) * total as u64
    }
}

pub fn lessons(config: &RlConfig) -> Vec<Lesson> {
    let n = config.m_max - config.m_min + 1;
    (0..n)
        .map(|i| Lesson {
            index: i,
            m: config.m_min + i,
            threshold_permille: 1000 - config.threshold_step_permille * (n - 1 - i) as u32,
        })
        .collect()
}

/// An exam instance, regenerable from its size and seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PoolEntry {
    pub lesson: usize,
    pub m: usize,
    pub seed: u64,
}

/// Solved (positive) and failed (negative) exam instances, FIFO-bounded.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Pools {
    pub positive: VecDeque<PoolEntry>,
    pub negative: VecDeque<PoolEntry>,
}

impl Pools {
    pub fn push(&mut self, entry: PoolEntry, success: bool, capacity: usize) {
        let pool = if success { &mut self.positive } else { &mut self.negative };
        pool.push_back(entry);
        while pool.len() > capacity {
            pool.pop_front();
        }
    }

    /// Drops entries from lessons before `first`.
    pub fn retain_from(&mut self, first: usize) {
        self.positive.retain(|e| e.lesson >= first);
        self.negative.retain(|e| e.lesson >= first);
    }
}

/// Draws one entry: from the positive pool with probability `omega`, else
/// the negative one; an empty pool defers to the other.
pub fn balanced_sample<R: Rng + ?Sized>(pools: &Pools, omega: f64, rng: &mut R) -> Result<PoolEntry, TrainError> {
    let want_positive = rng.random::<f64>() < omega;
    let pool = match (pools.positive.is_empty(), pools.negative.is_empty()) {
        (true, true) => return Err(TrainError::EmptyPools),
        (false, true) => &pools.positive,
        (true, false) => &pools.negative,
        (false, false) if want_positive => &pools.positive,
        (false, false) => &pools.negative,
    };
    Ok(pool[rng.random_range(0..pool.len())])
}

/// Everything needed to resume a curriculum run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurriculumState {
    pub lesson: usize,
    pub epochs_used: usize,
    pub exams_taken: u64,
    pub exam_draws: u64,
    pub train_episodes: u64,
    pub pools: Pools,
    pub adam: Adam,
    pub baseline: f64,
    /// Lessons passed, in order.
    pub completed: Vec<usize>,
    /// Most recent exam accuracy per lesson.
    pub last_accuracy: Vec<Option<f64>>,
    pub graduated: bool,
    pub failed: bool,
}

impl CurriculumState {
    pub fn new(config: &RlConfig, model: &Model) -> Self {
        Self {
            lesson: 0,
            epochs_used: 0,
            exams_taken: 0,
            exam_draws: 0,
            train_episodes: 0,
            pools: Pools::default(),
            adam: Adam::new(config.adam, &model.params),
            baseline: 0.0,
            completed: Vec::new(),
            last_accuracy: vec![None; lessons(config).len()],
            graduated: false,
            failed: false,
        }
    }

    pub fn is_finished(&self) -> bool {
        self.graduated || self.failed
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RlRecord {
    pub epoch: usize,
    pub lesson: usize,
    pub m: usize,
    pub exam_accuracy: f64,
    pub passed: bool,
    pub positive: usize,
    pub negative: usize,
    /// Mean total loss over the epoch's training episodes, if any ran.
    pub loss: Option<f64>,
    pub beta: f64,
}

pub enum CurriculumEvent<'a> {
    /// One exam, and the training epoch that followed it if any.
    Epoch(&'a RlRecord),
    LessonPassed(Lesson),
    Graduated,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurriculumReport {
    /// The callback asked to stop early; the state resumes exactly.
    pub stopped: bool,
    pub graduated: bool,
    pub epochs_used: usize,
    pub train_episodes: u64,
    pub lessons_passed: usize,
    /// Most recent exam accuracy per lesson (`None` if never examined).
    pub last_accuracy: Vec<Option<f64>>,
}

/// Exam-guided curriculum over lessons `m_min..=m_max`:
///
/// 1. exam: `exam_episodes` greedy episodes, each from one of the
///    `exam_lessons` most recent lessons (uniformly); instances go to the
///    positive or negative pool by outcome;
/// 2. pass (accuracy at or above the threshold) advances the lesson;
///    passing the last lesson graduates;
/// 3. otherwise one training epoch of `episodes_per_epoch` sampled
///    episodes on balanced draws from the pools, one Adam step each.
///
/// The run fails once `max_epochs` training epochs are spent without
/// graduating. `on_event` sees the model after every epoch and pass and may
/// return `Break` to stop; the returned state then resumes exactly.
pub fn curriculum_train(
    config: &RlConfig,
    task: TaskKind,
    model: &mut Model,
    seed: u64,
    state: Option<CurriculumState>,
    on_event: &mut dyn FnMut(&CurriculumEvent<'_>, &Model, &CurriculumState) -> ControlFlow<()>,
) -> Result<(CurriculumState, CurriculumReport), TrainError> {
    config.validate()?;
    let lessons = lessons(config);
    let mut state = state.unwrap_or_else(|| CurriculumState::new(config, model));
    let exam_base = derive(seed, "exam");
    let mut stopped = false;
    while !state.is_finished() {
        let lesson = lessons[state.lesson];
        let first = (lesson.index + 1).saturating_sub(config.exam_lessons);
        let mut pick = rng_from(derive_index(derive(seed, "exam-lessons"), state.exams_taken));
        let mut successes = 0;
        for _ in 0..config.exam_episodes {
            let l = &lessons[pick.random_range(first..=lesson.index)];
            let entry = PoolEntry { lesson: l.index, m: l.m, seed: derive_index(exam_base, state.exam_draws) };
            state.exam_draws += 1;
            let mut env = RlEnv::generate(task, entry.m, entry.seed, EnvMode::Train)?;
            let ep = rollout(model, &mut env, &mut Policy::Greedy)?;
            successes += usize::from(ep.success);
            state.pools.push(entry, ep.success, config.pool_capacity);
        }
        state.exams_taken += 1;
        let accuracy = successes as f64 / config.exam_episodes as f64;
        state.last_accuracy[lesson.index] = Some(accuracy);
        let passed = lesson.passes(successes, config.exam_episodes);
        let beta = config.beta_at(state.epochs_used);
        let mut record = RlRecord {
            epoch: state.epochs_used,
            lesson: lesson.index,
            m: lesson.m,
            exam_accuracy: accuracy,
            passed,
            positive: state.pools.positive.len(),
            negative: state.pools.negative.len(),
            loss: None,
            beta,
        };
        if passed {
            state.completed.push(lesson.index);
            if state.lesson + 1 == lessons.len() {
                state.graduated = true;
            } else {
                state.lesson += 1;
                state.pools.retain_from((state.lesson + 1).saturating_sub(config.exam_lessons));
            }
            let mut flow = on_event(&CurriculumEvent::Epoch(&record), model, &state);
            if on_event(&CurriculumEvent::LessonPassed(lesson), model, &state).is_break() {
                flow = ControlFlow::Break(());
            }
            if state.graduated && on_event(&CurriculumEvent::Graduated, model, &state).is_break() {
                flow = ControlFlow::Break(());
            }
            if flow.is_break() {
                stopped = true;
                break;
            }
            continue;
        }
        if state.epochs_used >= config.max_epochs {
            state.failed = true;
            let _ = on_event(&CurriculumEvent::Epoch(&record), model, &state);
            break;
        }
        let mut total = 0.0;
        for _ in 0..config.episodes_per_epoch {
            let mut rng = episode_rng(seed, state.train_episodes);
            state.train_episodes += 1;
            let entry = balanced_sample(&state.pools, config.omega, &mut rng)?;
            let mut env = RlEnv::generate(task, entry.m, entry.seed, EnvMode::Train)?;
            let episode = rollout(model, &mut env, &mut Policy::Sample(&mut rng))?;
            let terms =
                ReinforceTerms { beta, gamma: config.gamma, aux_weight: config.aux_weight, baseline: state.baseline };
            let loss = reinforce_update(model, &mut state.adam, &episode, &terms)?;
            total += loss.total;
            if config.baseline {
                let v0 = episode.returns(config.gamma).first().copied().unwrap_or(0.0);
                state.baseline = 0.9 * state.baseline + 0.1 * v0;
            }
        }
        state.epochs_used += 1;
        if config.episodes_per_epoch > 0 {
            record.loss = Some(total / config.episodes_per_epoch as f64);
        }
        if on_event(&CurriculumEvent::Epoch(&record), model, &state).is_break() {
            stopped = true;
            break;
        }
    }
    let report = CurriculumReport {
        stopped,
        graduated: state.graduated,
        epochs_used: state.epochs_used,
        train_episodes: state.train_episodes,
        lessons_passed: state.completed.len(),
        last_accuracy: state.last_accuracy.clone(),
    };
    Ok((state, report))
}
