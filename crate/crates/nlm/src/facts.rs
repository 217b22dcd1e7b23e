//! JSON fact files for the oracle command:
//!
//! ```json
//! {"objects": 3, "relations": {"On": {"arity": 2, "tuples": [[0, 1]]}}}
//! ```
//!
//! Tuples list the true groundings; everything else is false. Output files
//! use the same shape with tuples in lexicographic order.

use crate::{Error, Result};
use nlm_core::logic::{FactSet, Relation};
use nlm_core::tensor::{all_distinct, unflatten, valid_tuples};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RelationJson {
    pub arity: usize,
    pub tuples: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FactsJson {
    pub objects: usize,
    #[serde(default)]
    pub relations: BTreeMap<String, RelationJson>,
}

impl FactsJson {
    pub fn to_fact_set(&self) -> Result<FactSet> {
        let m = self.objects;
        let mut facts = FactSet::new(m);
        for (name, r) in &self.relations {
            let bad = |s: String| Error::Runtime(format!("relation `{name}`: {s}"));
            let mut rel = Relation::empty(r.arity, m);
            for t in &r.tuples {
                if t.len() != r.arity {
                    return Err(bad(format!("tuple {t:?} has {} objects, arity is {}", t.len(), r.arity)));
                }
                if let Some(o) = t.iter().find(|&&o| o >= m) {
                    return Err(bad(format!("object {o} out of range 0..{m}")));
                }
                if !all_distinct(t) {
                    return Err(bad(format!("tuple {t:?} repeats an object")));
                }
                rel.set(t, true);
            }
            facts.insert(name.clone(), rel).map_err(|e| bad(e.to_string()))?;
        }
        Ok(facts)
    }

    pub fn from_fact_set(facts: &FactSet) -> Self {
        let m = facts.num_objects();
        let relations = facts
            .iter()
            .map(|(name, rel)| {
                let r = rel.arity();
                let tuples = valid_tuples(m, r)
                    .into_iter()
                    .filter(|&f| rel.values()[f])
                    .map(|f| {
                        let mut idx = vec![0; r];
                        unflatten(f, m, r, &mut idx);
                        idx
                    })
                    .collect();
                (name.clone(), RelationJson { arity: r, tuples })
            })
            .collect();
        Self { objects: m, relations }
    }

    pub fn parse(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Runtime(format!("bad facts file: {e}")))
    }

    pub fn to_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("serializable")
    }
}
