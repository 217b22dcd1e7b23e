//! Sorting a permutation by swaps.

use super::{comparison_channels, reward, too_small, Environment, StepOutcome, TaskError, TaskKind};
use crate::rng::{derive, rng_from};
use crate::tensor::PredTensor;
use alloc::vec;
use alloc::vec::Vec;
use rand::seq::SliceRandom;

/// Binary channels: index comparisons then value comparisons.
pub const RELATIONS: [&str; 6] = ["IndexLess", "IndexEqual", "IndexGreater", "ValueLess", "ValueEqual", "ValueGreater"];

/// Swap the contents of slots `i` and `j`; the action index is `i * m + j`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SortEnv {
    pub array: Vec<usize>,
    steps: usize,
}

impl SortEnv {
    pub fn new(array: Vec<usize>) -> Self {
        Self { array, steps: 0 }
    }

    /// A uniform permutation of `0..m` that is not already sorted.
    pub fn generate(m: usize, seed: u64) -> Result<Self, TaskError> {
        too_small(TaskKind::Sorting, m, 2)?;
        let mut rng = rng_from(derive(seed, "sorting"));
        let mut array: Vec<usize> = (0..m).collect();
        loop {
            array.shuffle(&mut rng);
            if !is_sorted(&array) {
                return Ok(Self::new(array));
            }
        }
    }

    pub fn encode(&self) -> PredTensor {
        encode_slots(&self.array.iter().enumerate().map(|(i, &a)| (i, a)).collect::<Vec<_>>())
    }

    fn pair(&self, action: usize) -> Option<(usize, usize)> {
        let m = self.array.len();
        let (i, j) = (action / m, action % m);
        (action < m * m && i != j).then_some((i, j))
    }
}

/// Encodes slots given as `(position, value)`, in the given object order.
pub fn encode_slots(slots: &[(usize, usize)]) -> PredTensor {
    let attrs: Vec<Vec<i64>> = slots.iter().map(|&(p, v)| vec![p as i64, v as i64]).collect();
    comparison_channels(&attrs)
}

fn is_sorted(a: &[usize]) -> bool {
    a.windows(2).all(|w| w[0] <= w[1])
}

impl Environment for SortEnv {
    fn reset(&mut self, seed: u64) -> Result<(), TaskError> {
        *self = Self::generate(self.array.len(), seed)?;
        Ok(())
    }

    fn num_objects(&self) -> usize {
        self.array.len()
    }

    fn observe(&self) -> Vec<PredTensor> {
        let m = self.array.len();
        vec![PredTensor::zeros(0, m, 0), PredTensor::zeros(1, m, 0), self.encode()]
    }

    fn num_actions(&self) -> usize {
        self.array.len() * self.array.len()
    }

    fn applies(&self, action: usize) -> bool {
        self.pair(action).is_some()
    }

    fn step(&mut self, action: usize) -> Result<StepOutcome, TaskError> {
        if self.is_done() {
            return Err(TaskError::Finished);
        }
        let (i, j) = self.pair(action).ok_or(TaskError::BadAction { action, actions: self.num_actions() })?;
        self.array.swap(i, j);
        self.steps += 1;
        let solved = self.is_solved();
        Ok(StepOutcome { reward: reward(solved), applied: true, solved, done: self.is_done() })
    }

    fn is_solved(&self) -> bool {
        is_sorted(&self.array)
    }

    fn steps_taken(&self) -> usize {
        self.steps
    }

    fn step_limit(&self) -> usize {
        2 * self.array.len()
    }
}
