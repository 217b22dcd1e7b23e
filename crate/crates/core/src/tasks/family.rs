//! Family trees grown along a timeline, and kinship targets.
//!
//! Orientation: `IsFather(x, y)` reads "x is the father of y", likewise
//! `IsMother`; `IsSon(x, y)` / `IsDaughter(x, y)` read "x is a son / daughter
//! of y".

use super::{too_small, TaskError, TaskKind};
use crate::logic::{forward_chain, parse_program, FactSet, Relation};
use crate::rng::{derive, rng_from};
use crate::tensor::PredTensor;
use alloc::vec;
use alloc::vec::Vec;
use rand::seq::SliceRandom;
use rand::Rng;

pub const BASE_RELATIONS: [&str; 4] = ["IsSon", "IsDaughter", "IsFather", "IsMother"];

/// Chance that a new arrival triggers a marriage between two singles.
pub const MARRIAGE_PROB: f64 = 0.8;

/// Label rules. Uncles are blood uncles (a parent's brother); the maternal
/// great uncle is a brother of one's mother's parent.
pub const FAMILY_RULES: &str = "\
Parent(x,y) <- IsFather(x,y)
Parent(x,y) <- IsMother(x,y)
HasFather(x) <- IsFather(y,x)
HasSister(x) <- IsDaughter(y,p) & Parent(p,x)
IsGrandparent(x,y) <- Parent(x,z) & Parent(z,y)
Brother(x,y) <- IsSon(x,p) & Parent(p,y)
IsUncle(x,y) <- Brother(x,p) & Parent(p,y)
MaternalGrandparent(x,y) <- Parent(x,p) & IsMother(p,y)
IsMGUncle(x,y) <- Brother(x,g) & MaternalGrandparent(g,y)
";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Gender {
    Male,
    Female,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FamilyTree {
    pub gender: Vec<Gender>,
    pub father: Vec<Option<usize>>,
    pub mother: Vec<Option<usize>>,
}

impl FamilyTree {
    /// Builds a tree from explicit links, checking genders and acyclicity.
    pub fn from_links(gender: Vec<Gender>, father: Vec<Option<usize>>, mother: Vec<Option<usize>>) -> Option<Self> {
        let m = gender.len();
        if father.len() != m || mother.len() != m {
            return None;
        }
        for i in 0..m {
            if father[i].is_some_and(|f| f >= m || f == i || gender[f] != Gender::Male) {
                return None;
            }
            if mother[i].is_some_and(|p| p >= m || p == i || gender[p] != Gender::Female) {
                return None;
            }
        }
        let tree = Self { gender, father, mother };
        (0..m).all(|i| !tree.is_own_ancestor(i)).then_some(tree)
    }

    fn is_own_ancestor(&self, start: usize) -> bool {
        let mut stack: Vec<usize> = self.parents(start).collect();
        let mut seen = vec![false; self.len()];
        while let Some(p) = stack.pop() {
            if p == start {
                return true;
            }
            if !core::mem::replace(&mut seen[p], true) {
                stack.extend(self.parents(p));
            }
        }
        false
    }

    /// Timeline generation: each arrival gets a uniform gender and, with
    /// probability `couples / (couples + 1)`, a uniformly chosen married
    /// couple as parents; then two singles of opposite gender may marry.
    /// People are finally relabeled by a uniform permutation.
    pub fn generate(m: usize, seed: u64) -> Result<Self, TaskError> {
        too_small(TaskKind::HasFather, m, 2)?;
        let mut rng = rng_from(derive(seed, "family-tree"));
        let mut gender = Vec::with_capacity(m);
        let mut father = Vec::with_capacity(m);
        let mut mother = Vec::with_capacity(m);
        let mut couples: Vec<(usize, usize)> = Vec::new();
        let mut singles: [Vec<usize>; 2] = [Vec::new(), Vec::new()];
        for k in 0..m {
            let g = if rng.random_bool(0.5) { Gender::Male } else { Gender::Female };
            let pick = rng.random_range(0..=couples.len());
            let (f, mo) = couples.get(pick).map_or((None, None), |&(f, mo)| (Some(f), Some(mo)));
            gender.push(g);
            father.push(f);
            mother.push(mo);
            singles[g as usize].push(k);
            if !singles[0].is_empty() && !singles[1].is_empty() && rng.random_bool(MARRIAGE_PROB) {
                let a = singles[0].swap_remove(rng.random_range(0..singles[0].len()));
                let b = singles[1].swap_remove(rng.random_range(0..singles[1].len()));
                couples.push((a, b));
            }
        }
        let mut pi: Vec<usize> = (0..m).collect();
        pi.shuffle(&mut rng);
        Ok(Self { gender, father, mother }.relabel(&pi))
    }

    /// Person `i` becomes person `pi[i]`.
    pub fn relabel(&self, pi: &[usize]) -> Self {
        let m = self.len();
        let mut gender = vec![Gender::Male; m];
        let mut father = vec![None; m];
        let mut mother = vec![None; m];
        for i in 0..m {
            gender[pi[i]] = self.gender[i];
            father[pi[i]] = self.father[i].map(|f| pi[f]);
            mother[pi[i]] = self.mother[i].map(|p| pi[p]);
        }
        Self { gender, father, mother }
    }

    pub fn len(&self) -> usize {
        self.gender.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gender.is_empty()
    }

    pub fn parents(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        self.father[i].into_iter().chain(self.mother[i])
    }

    /// The four base relations in [`BASE_RELATIONS`] order.
    pub fn base_relations(&self) -> [Relation; 4] {
        let m = self.len();
        let child_of = |x: usize, y: usize, g: Gender| self.gender[x] == g && self.parents(x).any(|p| p == y);
        [
            Relation::from_fn(2, m, |i| child_of(i[0], i[1], Gender::Male)),
            Relation::from_fn(2, m, |i| child_of(i[0], i[1], Gender::Female)),
            Relation::from_fn(2, m, |i| self.father[i[1]] == Some(i[0])),
            Relation::from_fn(2, m, |i| self.mother[i[1]] == Some(i[0])),
        ]
    }

    pub fn facts(&self) -> FactSet {
        let mut facts = FactSet::new(self.len());
        for (name, rel) in BASE_RELATIONS.iter().zip(self.base_relations()) {
            facts.insert(*name, rel).expect("sizes agree");
        }
        facts
    }

    /// One binary premise group with the base relations as channels.
    pub fn premises(&self) -> Vec<PredTensor> {
        let rels = self.base_relations();
        let m = self.len();
        vec![
            PredTensor::zeros(0, m, 0),
            PredTensor::zeros(1, m, 0),
            PredTensor::from_fn(2, m, rels.len(), |idx, c| if rels[c].get(idx) { 1.0 } else { 0.0 }),
        ]
    }
}

fn target_name(task: TaskKind) -> Result<&'static str, TaskError> {
    Ok(match task {
        TaskKind::HasFather => "HasFather",
        TaskKind::HasSister => "HasSister",
        TaskKind::IsGrandparent => "IsGrandparent",
        TaskKind::IsUncle => "IsUncle",
        TaskKind::IsMGUncle => "IsMGUncle",
        other => return Err(TaskError::WrongKind(other.into(), "a family-tree task")),
    })
}

/// Labels for a family-tree target, by forward chaining [`FAMILY_RULES`].
pub fn labels(tree: &FamilyTree, task: TaskKind) -> Result<Relation, TaskError> {
    let name = target_name(task)?;
    let program = parse_program(FAMILY_RULES)?;
    let derived = forward_chain(&program, &tree.facts())?;
    Ok(derived.get(name).expect("program derives every target").clone())
}
