//! Blocks world: rearrange the operating world until it matches the target.
//!
//! Each world has a ground (id 0, at `(0, 0)`) and blocks `1..=n`. A block
//! on the ground sits at `(id, 1)`; a block on block `j` sits directly above
//! it. Objects are laid out world by world: object `w * (n + 1) + id`.

use super::{comparison_channels, reward, too_small, Environment, StepOutcome, TaskError, TaskKind};
use crate::logic::{forward_chain, shouldmove_fixture, FactSet, Relation};
use crate::model::HeadInput;
use crate::rng::{derive, rng_from};
use crate::tensor::PredTensor;
use alloc::vec;
use alloc::vec::Vec;
use rand::seq::SliceRandom;
use rand::Rng;

/// Comparison relations over `(world, id, x, y)`, three per attribute.
pub const RELATIONS: [&str; 12] = [
    "SmallerWorldID",
    "SameWorldID",
    "LargerWorldID",
    "SmallerID",
    "SameID",
    "LargerID",
    "Left",
    "SameX",
    "Right",
    "Below",
    "SameY",
    "Above",
];

/// One world: `on[id]` is the id below block `id` (`on[0]` is unused).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct World {
    pub on: Vec<usize>,
}

impl World {
    /// Each new block lands on a uniformly chosen placeable object (the
    /// ground or a clear block); ids are then shuffled.
    pub fn generate<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Self {
        let mut on = vec![0; n + 1];
        let mut placeable = vec![0usize];
        for b in 1..=n {
            let k = rng.random_range(0..placeable.len());
            let below = placeable[k];
            on[b] = below;
            if below != 0 {
                placeable.swap_remove(k);
            }
            placeable.push(b);
        }
        let mut ids: Vec<usize> = (1..=n).collect();
        ids.shuffle(rng);
        let mut pi = vec![0];
        pi.extend(ids);
        let mut shuffled = vec![0; n + 1];
        for b in 1..=n {
            shuffled[pi[b]] = pi[on[b]];
        }
        Self { on: shuffled }
    }

    pub fn num_blocks(&self) -> usize {
        self.on.len() - 1
    }

    pub fn is_clear(&self, id: usize) -> bool {
        (1..self.on.len()).all(|b| self.on[b] != id)
    }

    /// `(x, y)` of every id, ground included.
    pub fn coordinates(&self) -> Vec<(usize, usize)> {
        let n = self.num_blocks();
        let mut xy: Vec<Option<(usize, usize)>> = vec![None; n + 1];
        xy[0] = Some((0, 0));
        fn resolve(w: &World, id: usize, xy: &mut [Option<(usize, usize)>]) -> (usize, usize) {
            if let Some(c) = xy[id] {
                return c;
            }
            let below = w.on[id];
            let c = if below == 0 {
                (id, 1)
            } else {
                let (x, y) = resolve(w, below, xy);
                (x, y + 1)
            };
            xy[id] = Some(c);
            c
        }
        (0..=n).map(|id| resolve(self, id, &mut xy)).collect()
    }

    /// A forest of stacks: no cycles, at most one block on anything but the ground.
    pub fn is_valid(&self) -> bool {
        let n = self.num_blocks();
        for id in 1..=n {
            if self.on[id] > n || self.on[id] == id {
                return false;
            }
            if self.on[id] != 0 && (1..=n).filter(|&b| self.on[b] == self.on[id]).count() > 1 {
                return false;
            }
            let mut cur = id;
            for _ in 0..=n {
                cur = self.on[cur];
                if cur == 0 {
                    break;
                }
            }
            if cur != 0 {
                return false;
            }
        }
        true
    }
}

/// Operating world plus target world. Action `x * (n + 1) + y` moves block
/// `x` onto object `y` (the same id in both worlds).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlocksEnv {
    pub current: World,
    pub target: World,
    steps: usize,
}

impl BlocksEnv {
    pub fn new(current: World, target: World) -> Self {
        assert_eq!(current.on.len(), target.on.len(), "worlds differ in size");
        Self { current, target, steps: 0 }
    }

    /// Two independent worlds of `n` blocks; for `n >= 2` they are redrawn
    /// until they differ.
    pub fn generate(n: usize, seed: u64) -> Result<Self, TaskError> {
        too_small(TaskKind::BlocksWorld, n, 1)?;
        let mut rng = rng_from(derive(seed, "blocks-world"));
        loop {
            let current = World::generate(n, &mut rng);
            let target = World::generate(n, &mut rng);
            if n < 2 || current != target {
                return Ok(Self::new(current, target));
            }
        }
    }

    pub fn num_blocks(&self) -> usize {
        self.current.num_blocks()
    }

    /// `(world, id, x, y)` per object in layout order.
    pub fn objects(&self) -> Vec<(usize, usize, usize, usize)> {
        let mut out = Vec::with_capacity(2 * (self.num_blocks() + 1));
        for (w, world) in [&self.current, &self.target].into_iter().enumerate() {
            for (id, (x, y)) in world.coordinates().into_iter().enumerate() {
                out.push((w, id, x, y));
            }
        }
        out
    }

    pub fn facts(&self) -> FactSet {
        facts_from_encoding(&encode_objects(&self.objects()))
    }

    fn decode(&self, action: usize) -> Option<(usize, usize)> {
        let ids = self.num_blocks() + 1;
        let (x, y) = (action / ids, action % ids);
        (action < ids * ids && x != y).then_some((x, y))
    }
}

/// The twelve comparison channels for objects given as `(world, id, x, y)`.
pub fn encode_objects(objects: &[(usize, usize, usize, usize)]) -> PredTensor {
    let attrs: Vec<Vec<i64>> =
        objects.iter().map(|&(w, id, x, y)| vec![w as i64, id as i64, x as i64, y as i64]).collect();
    comparison_channels(&attrs)
}

/// Splits an encoding back into named relations.
pub fn facts_from_encoding(t: &PredTensor) -> FactSet {
    let mut facts = FactSet::new(t.num_objects());
    for (c, name) in RELATIONS.iter().enumerate() {
        facts.insert(*name, Relation::from_tensor(t, c)).expect("sizes agree");
    }
    facts
}

/// Oracle `ShouldMove` labels per object.
pub fn should_move_labels(env: &BlocksEnv) -> Result<Relation, TaskError> {
    let derived = forward_chain(&shouldmove_fixture(), &env.facts())?;
    Ok(derived.get("ShouldMove").expect("fixture derives ShouldMove").clone())
}

impl Environment for BlocksEnv {
    fn reset(&mut self, seed: u64) -> Result<(), TaskError> {
        *self = Self::generate(self.num_blocks(), seed)?;
        Ok(())
    }

    fn num_objects(&self) -> usize {
        2 * (self.num_blocks() + 1)
    }

    fn observe(&self) -> Vec<PredTensor> {
        let m = self.num_objects();
        vec![PredTensor::zeros(0, m, 0), PredTensor::zeros(1, m, 0), encode_objects(&self.objects())]
    }

    fn head_input(&self) -> HeadInput {
        let ids = self.num_blocks() + 1;
        HeadInput::Blocks { current: (0..ids).collect(), target: (ids..2 * ids).collect() }
    }

    fn num_actions(&self) -> usize {
        let ids = self.num_blocks() + 1;
        ids * ids
    }

    /// Block `x` is clear and `y` is the ground or clear.
    fn applies(&self, action: usize) -> bool {
        self.decode(action)
            .is_some_and(|(x, y)| x != 0 && self.current.is_clear(x) && (y == 0 || self.current.is_clear(y)))
    }

    fn step(&mut self, action: usize) -> Result<StepOutcome, TaskError> {
        if self.is_done() {
            return Err(TaskError::Finished);
        }
        if self.decode(action).is_none() {
            return Err(TaskError::BadAction { action, actions: self.num_actions() });
        }
        let applied = self.applies(action);
        if applied {
            let (x, y) = self.decode(action).expect("checked");
            self.current.on[x] = y;
        }
        self.steps += 1;
        let solved = self.is_solved();
        Ok(StepOutcome { reward: reward(solved), applied, solved, done: self.is_done() })
    }

    /// The id-to-coordinate maps of both worlds agree.
    fn is_solved(&self) -> bool {
        self.current.coordinates() == self.target.coordinates()
    }

    fn steps_taken(&self) -> usize {
        self.steps
    }

    fn step_limit(&self) -> usize {
        4 * self.num_blocks()
    }
}
