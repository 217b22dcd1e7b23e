//! Training: supervised minibatch Adam, REINFORCE with an entropy bonus,
//! and the exam-guided curriculum with balanced replay pools.
//!
//! Every random draw is derived from the run seed and a counter kept in the
//! resumable state, so an interrupted run continues exactly.

mod curriculum;
mod rl;
mod supervised;

pub use curriculum::{
    balanced_sample, curriculum_train, lessons, CurriculumEvent, CurriculumReport, CurriculumState, Lesson, PoolEntry,
    Pools, RlConfig, RlRecord,
};
pub use rl::{
    choose_action, evaluate, reinforce_gradients, reinforce_update, rollout, EpisodeLoss, EvalReport, Policy,
    ReinforceTerms,
};
pub use supervised::{
    accuracy, example_seed, instance_gradients, train_supervised, Accuracy, Dataset, Generated, SupervisedConfig,
    SupervisedRecord, SupervisedReport, SupervisedState,
};

use crate::autodiff::AutodiffError;
use crate::model::ModelError;
use crate::tasks::TaskError;
use alloc::string::String;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TrainError {
    #[error("invalid training config: {0}")]
    Config(String),
    #[error("loss became {loss} at step {step}")]
    Diverged { step: u64, loss: f64 },
    #[error("chosen action {action} has zero probability at step {step}")]
    ZeroProbability { step: usize, action: usize },
    #[error("both replay pools are empty")]
    EmptyPools,
    #[error("nothing to evaluate")]
    EmptyEvaluation,
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Task(#[from] TaskError),
    #[error(transparent)]
    Autodiff(#[from] AutodiffError),
}
