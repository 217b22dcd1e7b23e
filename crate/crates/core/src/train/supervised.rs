use super::TrainError;
use crate::autodiff::{accumulate, Adam, AdamConfig, AutodiffError, Tape};
use crate::model::Model;
use crate::rng::{derive, derive_index};
use crate::tasks::{generate_labeled, LabeledInstance, TaskKind};
use crate::tensor::valid_tuples;
use alloc::vec::Vec;
use core::ops::ControlFlow;
use serde::{Deserialize, Serialize};

fn default_batch() -> usize {
    4
}

fn default_threshold() -> f64 {
    1e-6
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SupervisedConfig {
    #[serde(default)]
    pub adam: AdamConfig,
    #[serde(default = "default_batch")]
    pub batch_size: usize,
    pub max_examples: usize,
    /// Graduation: mean per-instance loss of one batch below this.
    #[serde(default = "default_threshold")]
    pub loss_threshold: f64,
    /// Held-out accuracy every this many steps; 0 disables it.
    #[serde(default)]
    pub eval_every: usize,
    #[serde(default)]
    pub eval_instances: usize,
    #[serde(default)]
    pub eval_m: usize,
}

impl SupervisedConfig {
    pub fn new(max_examples: usize) -> Self {
        Self {
            adam: AdamConfig::default(),
            batch_size: default_batch(),
            max_examples,
            loss_threshold: default_threshold(),
            eval_every: 0,
            eval_instances: 0,
            eval_m: 0,
        }
    }

    pub fn validate(&self) -> Result<(), TrainError> {
        if !(self.adam.lr > 0.0) || self.batch_size == 0 {
            return Err(TrainError::Config("learning rate must be positive and batch size at least 1".into()));
        }
        if self.eval_every > 0 && (self.eval_instances == 0 || self.eval_m < 2) {
            return Err(TrainError::Config("held-out evaluation needs eval_instances > 0 and eval_m >= 2".into()));
        }
        Ok(())
    }
}

/// Where training examples come from, by index.
pub trait Dataset {
    fn task(&self) -> TaskKind;
    fn example(&self, index: u64) -> Result<LabeledInstance, TrainError>;
}

/// Fresh generated instances of one size; example `k` uses [`example_seed`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Generated {
    pub task: TaskKind,
    pub m: usize,
    pub seed: u64,
}

pub fn example_seed(seed: u64, index: u64) -> u64 {
    derive_index(derive(seed, "train-data"), index)
}

impl Dataset for Generated {
    fn task(&self) -> TaskKind {
        self.task
    }

    fn example(&self, index: u64) -> Result<LabeledInstance, TrainError> {
        Ok(generate_labeled(self.task, self.m, example_seed(self.seed, index))?)
    }
}

/// A fixed list, cycled.
impl Dataset for Vec<LabeledInstance> {
    fn task(&self) -> TaskKind {
        self[0].task
    }

    fn example(&self, index: u64) -> Result<LabeledInstance, TrainError> {
        if self.is_empty() {
            return Err(TrainError::EmptyEvaluation);
        }
        Ok(self[(index % self.len() as u64) as usize].clone())
    }
}

/// Resumable progress.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupervisedState {
    pub adam: Adam,
    pub examples: u64,
    pub steps: u64,
    pub graduated: bool,
    /// Mean per-instance loss of the latest minibatch.
    pub last_loss: Option<f64>,
}

impl SupervisedState {
    pub fn new(config: &SupervisedConfig, model: &Model) -> Self {
        Self { adam: Adam::new(config.adam, &model.params), examples: 0, steps: 0, graduated: false, last_loss: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupervisedRecord {
    pub step: u64,
    pub examples: u64,
    pub loss: f64,
    pub accuracy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SupervisedReport {
    /// The callback asked to stop early; the state resumes exactly.
    pub stopped: bool,
    pub graduated: bool,
    pub steps: u64,
    pub examples: u64,
    /// Mean loss of the last minibatch; NaN if no step ran.
    pub final_loss: f64,
}

/// Summed softmax cross-entropy of one instance and its parameter gradients.
pub fn instance_gradients(model: &Model, inst: &LabeledInstance) -> Result<(f64, Vec<Vec<f64>>), TrainError> {
    let mut tape = Tape::new();
    let binding = tape.bind(&model.params);
    let logits = model.classify_logits(&mut tape, &binding, &inst.premises)?;
    let labels = &inst.labels;
    let targets: Vec<(usize, usize)> = valid_tuples(labels.num_objects(), labels.arity())
        .into_iter()
        .map(|f| (f, usize::from(labels.values()[f])))
        .collect();
    let loss = tape.softmax_xent(logits, &targets)?;
    if !tape.scalar(loss).is_finite() {
        return Err(TrainError::Diverged { step: 0, loss: tape.scalar(loss) });
    }
    let grads = tape.backward(loss)?;
    Ok((tape.scalar(loss), grads.for_params(&model.params, &binding)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Accuracy {
    pub correct: u64,
    pub total: u64,
}

impl Accuracy {
    pub fn rate(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.correct as f64 / self.total as f64
        }
    }

    pub fn add(&mut self, other: Accuracy) {
        self.correct += other.correct;
        self.total += other.total;
    }
}

/// Micro accuracy over every object or pair of `inst`.
pub fn accuracy(model: &Model, inst: &LabeledInstance) -> Result<Accuracy, TrainError> {
    let probs = model.classify_probs(&inst.premises)?;
    let labels = &inst.labels;
    let mut acc = Accuracy::default();
    for f in valid_tuples(labels.num_objects(), labels.arity()) {
        acc.total += 1;
        if (probs.data()[f] > 0.5) == labels.values()[f] {
            acc.correct += 1;
        }
    }
    Ok(acc)
}

/// Minibatch Adam until the loss threshold or the example budget. Example
/// `k` of the run is `dataset.example(k)`; held-out instances come from
/// `derive(seed, "heldout")`. `on_record` may return `Break` to stop after
/// any step.
pub fn train_supervised(
    config: &SupervisedConfig,
    model: &mut Model,
    dataset: &dyn Dataset,
    seed: u64,
    state: Option<SupervisedState>,
    on_record: &mut dyn FnMut(&SupervisedRecord, &Model) -> ControlFlow<()>,
) -> Result<(SupervisedState, SupervisedReport), TrainError> {
    config.validate()?;
    let mut state = state.unwrap_or_else(|| SupervisedState::new(config, model));
    let heldout_seed = derive(seed, "heldout");
    let mut stopped = false;
    while !state.graduated && state.examples < config.max_examples as u64 {
        let n = (config.batch_size as u64).min(config.max_examples as u64 - state.examples);
        let mut grads: Option<Vec<Vec<f64>>> = None;
        let mut loss = 0.0;
        for k in 0..n {
            let inst = dataset.example(state.examples + k)?;
            let (l, g) = instance_gradients(model, &inst).map_err(|e| match e {
                TrainError::Diverged { loss, .. } => TrainError::Diverged { step: state.steps, loss },
                e => e,
            })?;
            loss += l;
            match &mut grads {
                Some(acc) => accumulate(acc, &g),
                None => grads = Some(g),
            }
        }
        if !loss.is_finite() {
            return Err(TrainError::Diverged { step: state.steps, loss });
        }
        state.adam.apply(&mut model.params, grads.as_deref().expect("n >= 1")).map_err(|e| match e {
            AutodiffError::NonFiniteGradient { .. } => TrainError::Diverged { step: state.steps, loss: f64::NAN },
            e => e.into(),
        })?;
        state.examples += n;
        state.steps += 1;
        let mean = loss / n as f64;
        state.last_loss = Some(mean);
        state.graduated = mean < config.loss_threshold;
        let at_end = state.graduated || state.examples >= config.max_examples as u64;
        let evaluate = config.eval_every > 0 && (state.steps % config.eval_every as u64 == 0 || at_end);
        let accuracy = if evaluate {
            let held = Generated { task: dataset.task(), m: config.eval_m, seed: heldout_seed };
            let mut acc = Accuracy::default();
            for k in 0..config.eval_instances as u64 {
                acc.add(accuracy(model, &held.example(k)?)?);
            }
            Some(acc.rate())
        } else {
            None
        };
        let record = SupervisedRecord { step: state.steps, examples: state.examples, loss: mean, accuracy };
        if on_record(&record, model).is_break() {
            stopped = true;
            break;
        }
    }
    let report = SupervisedReport {
        stopped,
        graduated: state.graduated,
        steps: state.steps,
        examples: state.examples,
        final_loss: state.last_loss.unwrap_or(f64::NAN),
    };
    Ok((state, report))
}
