//! Random stratified programs and fact sets for cross-checking evaluators.

use super::{Atom, FactSet, HornClause, HornProgram, Literal, Relation, Schema};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;

#[derive(Debug, Clone, Copy)]
pub struct RandomProgramConfig {
    pub max_arity: usize,
    /// Upper bound on variables per clause (keep `<= m`).
    pub max_vars: usize,
    pub base_predicates: usize,
    pub derived_predicates: usize,
    pub max_body: usize,
    pub negation_prob: f64,
    pub forall_prob: f64,
}

impl Default for RandomProgramConfig {
    fn default() -> Self {
        Self {
            max_arity: 2,
            max_vars: 4,
            base_predicates: 3,
            derived_predicates: 3,
            max_body: 3,
            negation_prob: 0.3,
            forall_prob: 0.3,
        }
    }
}

/// A clause for `head` whose body draws from `available`.
pub fn random_clause<R: Rng + ?Sized>(
    rng: &mut R,
    head: &Schema,
    available: &[Schema],
    cfg: &RandomProgramConfig,
) -> HornClause {
    let head_vars: Vec<String> = (0..head.arity).map(|i| format!("x{i}")).collect();
    let max_fresh = cfg.max_vars.saturating_sub(head.arity);
    let fresh: Vec<String> = (0..max_fresh).map(|i| format!("z{i}")).collect();
    let mut pool: Vec<String> = head_vars.clone();
    pool.extend(fresh.iter().cloned());
    loop {
        let n = rng.random_range(1..=cfg.max_body);
        let mut body = Vec::with_capacity(n);
        for _ in 0..n {
            let s = available.choose(rng).expect("non-empty vocabulary");
            if s.arity > pool.len() {
                continue;
            }
            let args: Vec<String> = pool.choose_multiple(rng, s.arity).cloned().collect();
            let atom = Atom { predicate: s.name.clone(), args };
            body.push(Literal { atom, negated: rng.random_bool(cfg.negation_prob) });
        }
        if body.is_empty() {
            continue;
        }
        let forall: Vec<&str> = fresh.iter().filter(|_| rng.random_bool(cfg.forall_prob)).map(String::as_str).collect();
        let used: Vec<&str> = forall
            .iter()
            .copied()
            .filter(|v| body.iter().any(|l: &Literal| l.atom.args.iter().any(|a| a == v)))
            .collect();
        let head_atom = Atom { predicate: head.name.clone(), args: head_vars.clone() };
        let mut clause = HornClause::new(head_atom, body, &used).expect("generated clause is well formed");
        // Occasionally scramble the quantifier order.
        if clause.prefix.len() > 1 && rng.random_bool(0.2) {
            clause.prefix.shuffle(rng);
        }
        return clause;
    }
}

/// A random non-recursive program: derived predicate `D{k}` may use base
/// predicates and `D0..D{k-1}`, possibly negated.
pub fn random_program<R: Rng + ?Sized>(rng: &mut R, cfg: &RandomProgramConfig) -> HornProgram {
    let mut vocab: Vec<Schema> = (0..cfg.base_predicates)
        .map(|i| Schema { name: format!("B{i}"), arity: rng.random_range(0..=cfg.max_arity) })
        .collect();
    // At least one base predicate with positive arity keeps programs interesting.
    if vocab.iter().all(|s| s.arity == 0) {
        vocab[0].arity = 1;
    }
    let mut clauses = Vec::new();
    for k in 0..cfg.derived_predicates {
        let head = Schema { name: format!("D{k}"), arity: rng.random_range(0..=cfg.max_arity) };
        for _ in 0..rng.random_range(1..=2) {
            clauses.push(random_clause(rng, &head, &vocab, cfg));
        }
        vocab.push(head);
    }
    HornProgram::new(clauses).expect("generated program is stratified")
}

/// Random groundings for every base predicate of `program`.
pub fn random_facts<R: Rng + ?Sized>(rng: &mut R, program: &HornProgram, m: usize, density: f64) -> FactSet {
    let mut facts = FactSet::new(m);
    for s in &program.base {
        let rel = Relation::from_fn(s.arity, m, |_| rng.random_bool(density));
        facts.insert(s.name.clone(), rel).expect("same universe");
    }
    facts
}
