//! Exact Horn-clause reasoning over finite universes.
//!
//! Variables always range over *distinct* objects, mirroring the masked
//! tensors: a head tuple with a repeated object is never derived, and a
//! quantified variable skips the objects bound to the head variables that
//! occur in the body and to enclosing quantified variables. Head-only
//! variables sit outside the body's scope and do not constrain it. Body-only
//! variables are quantified in order of first appearance (a `forall v` or
//! `exists v` marker counts as an appearance); `exists` is the default.

mod fixture;
mod parse;
mod plan;
pub mod random;

pub use fixture::{shouldmove_fixture, SHOULDMOVE_RULES};
pub use parse::{parse_clause, parse_program};
pub use plan::{compile_clause_plan, execute_plan, execute_plan_with, ClausePlan, PlanStep};

use crate::tensor::{all_distinct, cube_len, flatten, unflatten, valid_tuples, PredTensor};
use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LogicError {
    #[error("line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("predicate `{name}` used with arity {got}, expected {expected}")]
    Arity { name: String, expected: usize, got: usize },
    #[error("cyclic predicate dependency: {}", .0.join(" -> "))]
    Cycle(Vec<String>),
    #[error("no facts given for base predicate `{0}`")]
    MissingFacts(String),
    #[error("facts given for `{0}`, which the program derives")]
    DerivedFacts(String),
    #[error("unknown predicate `{0}`")]
    UnknownPredicate(String),
    #[error("invalid clause for `{head}`: {reason}")]
    Clause { head: String, reason: String },
    #[error("clause uses {vars} variables but only {m} objects exist")]
    TooManyVariables { vars: usize, m: usize },
    #[error("clause needs arity {needed}, above breadth {breadth}")]
    Breadth { needed: usize, breadth: usize },
    #[error("relation over {got} objects, expected {expected}")]
    ObjectCount { expected: usize, got: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Quantifier {
    Exists,
    Forall,
}

/// A predicate applied to variables.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Atom {
    pub predicate: String,
    pub args: Vec<String>,
}

impl Atom {
    pub fn new(predicate: impl Into<String>, args: &[&str]) -> Self {
        Self { predicate: predicate.into(), args: args.iter().map(|s| s.to_string()).collect() }
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({})", self.predicate, self.args.join(","))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Literal {
    pub atom: Atom,
    pub negated: bool,
}

impl Literal {
    pub fn pos(atom: Atom) -> Self {
        Self { atom, negated: false }
    }

    pub fn neg(atom: Atom) -> Self {
        Self { atom, negated: true }
    }
}

/// `head <- Q1 v1 .. Qk vk . body_1 & .. & body_n`, where `v1..vk` are the
/// body-only variables, outermost first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HornClause {
    pub head: Atom,
    pub body: Vec<Literal>,
    /// Quantifier of every body-only variable, outermost first.
    pub prefix: Vec<(String, Quantifier)>,
}

impl HornClause {
    /// Builds a clause; body-only variables default to `exists` unless
    /// listed in `forall`.
    pub fn new(head: Atom, body: Vec<Literal>, forall: &[&str]) -> Result<Self, LogicError> {
        let head_vars: BTreeSet<&str> = head.args.iter().map(String::as_str).collect();
        let mut prefix: Vec<(String, Quantifier)> = Vec::new();
        for lit in &body {
            for a in &lit.atom.args {
                if !head_vars.contains(a.as_str()) && !prefix.iter().any(|(v, _)| v == a) {
                    let q = if forall.contains(&a.as_str()) { Quantifier::Forall } else { Quantifier::Exists };
                    prefix.push((a.clone(), q));
                }
            }
        }
        if let Some(v) = forall.iter().find(|v| !prefix.iter().any(|(p, _)| p == *v)) {
            return Err(LogicError::Clause {
                head: head.predicate.clone(),
                reason: format!("`forall {v}` names no body-only variable"),
            });
        }
        let clause = Self { head, body, prefix };
        clause.check()?;
        Ok(clause)
    }

    fn check(&self) -> Result<(), LogicError> {
        let bad = |reason: String| Err(LogicError::Clause { head: self.head.predicate.clone(), reason });
        if self.body.is_empty() {
            return bad("empty body".into());
        }
        if !distinct_names(&self.head.args) {
            return bad("repeated variable in head".into());
        }
        for lit in &self.body {
            if !distinct_names(&lit.atom.args) {
                return bad(format!("repeated variable in `{}`; variables denote distinct objects", lit.atom));
            }
        }
        let mut body_only: Vec<&String> = Vec::new();
        for lit in &self.body {
            for a in &lit.atom.args {
                if !self.head.args.contains(a) && !body_only.contains(&a) {
                    body_only.push(a);
                }
            }
        }
        let listed: Vec<&String> = self.prefix.iter().map(|(v, _)| v).collect();
        if listed.len() != body_only.len() || !distinct_names(&self.prefix.iter().map(|(v, _)| v.clone()).collect::<Vec<_>>())
            || body_only.iter().any(|v| !listed.contains(v))
        {
            return bad("quantifier prefix must list each body-only variable exactly once".into());
        }
        Ok(())
    }

    /// Head variables that never occur in the body.
    pub fn head_only_vars(&self) -> Vec<String> {
        self.head
            .args
            .iter()
            .filter(|v| !self.body.iter().any(|l| l.atom.args.contains(v)))
            .cloned()
            .collect()
    }

    /// Head variables that also occur in the body, in head order.
    pub fn shared_vars(&self) -> Vec<String> {
        self.head
            .args
            .iter()
            .filter(|v| self.body.iter().any(|l| l.atom.args.contains(v)))
            .cloned()
            .collect()
    }

    pub fn num_vars(&self) -> usize {
        self.head.args.len() + self.prefix.len()
    }
}

fn distinct_names(v: &[String]) -> bool {
    v.iter().enumerate().all(|(i, a)| !v[..i].contains(a))
}

impl HornClause {
    fn appearance_order(&self) -> Vec<&String> {
        let mut out: Vec<&String> = Vec::new();
        for lit in &self.body {
            for a in &lit.atom.args {
                if !self.head.args.contains(a) && !out.contains(&a) {
                    out.push(a);
                }
            }
        }
        out
    }
}

/// Prints in the text format; markers are only written where the default
/// (exists, first-appearance order) would not reproduce the clause.
impl fmt::Display for HornClause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} <-", self.head)?;
        let natural = self.appearance_order().into_iter().eq(self.prefix.iter().map(|(v, _)| v));
        if !natural {
            for (v, q) in &self.prefix {
                let kw = if *q == Quantifier::Forall { "forall" } else { "exists" };
                write!(f, " {kw} {v}")?;
            }
        }
        let mut announced: BTreeSet<&str> = BTreeSet::new();
        for (i, lit) in self.body.iter().enumerate() {
            if i > 0 {
                write!(f, " &")?;
            }
            if natural {
                for a in &lit.atom.args {
                    if let Some((v, Quantifier::Forall)) = self.prefix.iter().find(|(v, _)| v == a) {
                        if announced.insert(v) {
                            write!(f, " forall {v}")?;
                        }
                    }
                }
            }
            write!(f, " {}{}", if lit.negated { "!" } else { "" }, lit.atom)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Schema {
    pub name: String,
    pub arity: usize,
}

/// A stratified, non-recursive program.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HornProgram {
    /// Predicates that only appear in bodies.
    pub base: Vec<Schema>,
    /// Derived predicates in dependency order.
    pub derived: Vec<Schema>,
    /// Clauses grouped by head, heads in dependency order.
    pub clauses: Vec<HornClause>,
}

impl HornProgram {
    /// Infers schemas, checks arities and orders clauses so every predicate
    /// is derived before it is used. Cycles are rejected.
    pub fn new(clauses: Vec<HornClause>) -> Result<Self, LogicError> {
        let mut arity: BTreeMap<String, usize> = BTreeMap::new();
        let mut note = |name: &str, got: usize| -> Result<(), LogicError> {
            match arity.get(name) {
                Some(&expected) if expected != got => Err(LogicError::Arity { name: name.into(), expected, got }),
                Some(_) => Ok(()),
                None => {
                    arity.insert(name.into(), got);
                    Ok(())
                }
            }
        };
        for c in &clauses {
            note(&c.head.predicate, c.head.args.len())?;
            for l in &c.body {
                note(&l.atom.predicate, l.atom.args.len())?;
            }
        }
        // Heads in order of first definition; dependencies from bodies.
        let mut heads: Vec<String> = Vec::new();
        for c in &clauses {
            if !heads.contains(&c.head.predicate) {
                heads.push(c.head.predicate.clone());
            }
        }
        let deps = |h: &str| -> BTreeSet<String> {
            clauses
                .iter()
                .filter(|c| c.head.predicate == h)
                .flat_map(|c| c.body.iter().map(|l| l.atom.predicate.clone()))
                .filter(|p| heads.contains(p))
                .collect()
        };
        // Depth-first topological sort that reports the cycle it finds.
        #[derive(Clone, Copy, PartialEq)]
        enum Mark {
            New,
            Active,
            Done,
        }
        let mut marks: BTreeMap<String, Mark> = heads.iter().map(|h| (h.clone(), Mark::New)).collect();
        let mut order: Vec<String> = Vec::new();
        fn visit(
            h: &str,
            deps: &dyn Fn(&str) -> BTreeSet<String>,
            marks: &mut BTreeMap<String, Mark>,
            stack: &mut Vec<String>,
            order: &mut Vec<String>,
        ) -> Result<(), LogicError> {
            match marks[h] {
                Mark::Done => return Ok(()),
                Mark::Active => {
                    let start = stack.iter().position(|s| s == h).unwrap_or(0);
                    let mut cycle: Vec<String> = stack[start..].to_vec();
                    cycle.push(h.into());
                    return Err(LogicError::Cycle(cycle));
                }
                Mark::New => {}
            }
            marks.insert(h.into(), Mark::Active);
            stack.push(h.into());
            for d in deps(h) {
                visit(&d, deps, marks, stack, order)?;
            }
            stack.pop();
            marks.insert(h.into(), Mark::Done);
            order.push(h.into());
            Ok(())
        }
        for h in &heads {
            visit(h, &deps, &mut marks, &mut Vec::new(), &mut order)?;
        }
        let mut sorted = Vec::with_capacity(clauses.len());
        for h in &order {
            sorted.extend(clauses.iter().filter(|c| &c.head.predicate == h).cloned());
        }
        let derived = order.iter().map(|h| Schema { name: h.clone(), arity: arity[h] }).collect();
        let base = arity
            .iter()
            .filter(|(n, _)| !heads.contains(n))
            .map(|(n, &a)| Schema { name: n.clone(), arity: a })
            .collect();
        Ok(Self { base, derived, clauses: sorted })
    }

    pub fn schema(&self, name: &str) -> Option<&Schema> {
        self.base.iter().chain(&self.derived).find(|s| s.name == name)
    }
}

/// Boolean grounding of one predicate: a full `m^r` cube, false off the
/// distinct-tuple mask.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Relation {
    arity: usize,
    m: usize,
    values: Vec<bool>,
}

impl Relation {
    pub fn empty(arity: usize, m: usize) -> Self {
        Self { arity, m, values: vec![false; cube_len(m, arity)] }
    }

    pub fn from_fn(arity: usize, m: usize, mut f: impl FnMut(&[usize]) -> bool) -> Self {
        let mut rel = Self::empty(arity, m);
        let mut idx = vec![0; arity];
        for flat in valid_tuples(m, arity) {
            unflatten(flat, m, arity, &mut idx);
            rel.values[flat] = f(&idx);
        }
        rel
    }

    /// Reads a tensor channel, thresholding at 0.5.
    pub fn from_tensor(t: &PredTensor, channel: usize) -> Self {
        Self::from_fn(t.arity(), t.num_objects(), |idx| t.get(idx, channel) > 0.5)
    }

    pub fn to_tensor(&self) -> PredTensor {
        PredTensor::from_fn(self.arity, self.m, 1, |idx, _| if self.get(idx) { 1.0 } else { 0.0 })
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn num_objects(&self) -> usize {
        self.m
    }

    pub fn get(&self, idx: &[usize]) -> bool {
        all_distinct(idx) && self.values[flatten(idx, self.m)]
    }

    pub fn set(&mut self, idx: &[usize], value: bool) {
        assert!(all_distinct(idx), "relation index {idx:?} repeats an object");
        let f = flatten(idx, self.m);
        self.values[f] = value;
    }

    pub fn count(&self) -> usize {
        self.values.iter().filter(|&&v| v).count()
    }

    /// Values over the full `m^r` cube, row-major.
    pub fn values(&self) -> &[bool] {
        &self.values
    }

    /// Builds a relation from full-cube values; entries off the mask must be false.
    pub fn from_values(arity: usize, m: usize, values: Vec<bool>) -> Option<Self> {
        if values.len() != cube_len(m, arity) {
            return None;
        }
        let mut idx = vec![0; arity];
        for (flat, &v) in values.iter().enumerate() {
            unflatten(flat, m, arity, &mut idx);
            if v && !all_distinct(&idx) {
                return None;
            }
        }
        Some(Self { arity, m, values })
    }

    pub(crate) fn get_flat(&self, flat: usize) -> bool {
        self.values[flat]
    }
}

/// Groundings of named predicates over one universe of `m` objects.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FactSet {
    m: usize,
    relations: BTreeMap<String, Relation>,
}

impl FactSet {
    pub fn new(m: usize) -> Self {
        Self { m, relations: BTreeMap::new() }
    }

    pub fn num_objects(&self) -> usize {
        self.m
    }

    pub fn insert(&mut self, name: impl Into<String>, rel: Relation) -> Result<(), LogicError> {
        if rel.m != self.m {
            return Err(LogicError::ObjectCount { expected: self.m, got: rel.m });
        }
        self.relations.insert(name.into(), rel);
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&Relation> {
        self.relations.get(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Relation)> {
        self.relations.iter()
    }
}

/// A clause with variables numbered: shared head variables first (head
/// order), then the quantifier prefix. Head-only variables get no number.
struct Indexed<'a> {
    /// For each head position, its variable number if it occurs in the body.
    head: Vec<Option<usize>>,
    shared: usize,
    lits: Vec<(&'a Relation, Vec<usize>, bool)>,
    prefix: Vec<Quantifier>,
}

impl Indexed<'_> {
    fn nvars(&self) -> usize {
        self.shared + self.prefix.len()
    }
}

fn index_clause<'a>(clause: &HornClause, facts: &'a BTreeMap<String, Relation>) -> Result<Indexed<'a>, LogicError> {
    let shared = clause.shared_vars();
    let mut names: Vec<&str> = shared.iter().map(String::as_str).collect();
    names.extend(clause.prefix.iter().map(|(v, _)| v.as_str()));
    let pos = |v: &str| names.iter().position(|n| *n == v);
    let mut lits = Vec::with_capacity(clause.body.len());
    for l in &clause.body {
        let rel = facts.get(&l.atom.predicate).ok_or_else(|| LogicError::UnknownPredicate(l.atom.predicate.clone()))?;
        if rel.arity != l.atom.args.len() {
            return Err(LogicError::Arity { name: l.atom.predicate.clone(), expected: rel.arity, got: l.atom.args.len() });
        }
        lits.push((rel, l.atom.args.iter().map(|a| pos(a).expect("checked clause")).collect(), l.negated));
    }
    Ok(Indexed {
        head: clause.head.args.iter().map(|a| pos(a)).collect(),
        shared: shared.len(),
        lits,
        prefix: clause.prefix.iter().map(|(_, q)| *q).collect(),
    })
}

fn flat_of(args: &[usize], vals: &[usize], m: usize) -> usize {
    args.iter().fold(0, |acc, &a| acc * m + vals[a])
}

/// Recursive evaluation with short-circuiting quantifiers.
fn eval_prefix(c: &Indexed<'_>, m: usize, vals: &mut [usize], depth: usize) -> bool {
    let bound = c.shared + depth;
    if depth == c.prefix.len() {
        return c.lits.iter().all(|(rel, args, neg)| rel.get_flat(flat_of(args, vals, m)) != *neg);
    }
    let forall = c.prefix[depth] == Quantifier::Forall;
    for o in 0..m {
        if vals[..bound].contains(&o) {
            continue;
        }
        vals[bound] = o;
        let v = eval_prefix(c, m, vals, depth + 1);
        if forall && !v {
            return false;
        }
        if !forall && v {
            return true;
        }
    }
    forall
}

fn check_base(program: &HornProgram, base: &FactSet) -> Result<(), LogicError> {
    for s in &program.base {
        match base.get(&s.name) {
            None => return Err(LogicError::MissingFacts(s.name.clone())),
            Some(r) if r.arity != s.arity => {
                return Err(LogicError::Arity { name: s.name.clone(), expected: s.arity, got: r.arity })
            }
            Some(_) => {}
        }
    }
    if let Some(d) = program.derived.iter().find(|d| base.get(&d.name).is_some()) {
        return Err(LogicError::DerivedFacts(d.name.clone()));
    }
    Ok(())
}

/// Evaluates the program stratum by stratum; clauses sharing a head are
/// OR-ed. Returns the base facts extended with every derived predicate.
pub fn forward_chain(program: &HornProgram, base: &FactSet) -> Result<FactSet, LogicError> {
    check_base(program, base)?;
    let m = base.m;
    let mut facts = base.relations.clone();
    for schema in &program.derived {
        let mut rel = Relation::empty(schema.arity, m);
        for clause in program.clauses.iter().filter(|c| c.head.predicate == schema.name) {
            let c = index_clause(clause, &facts)?;
            let mut vals = vec![0usize; c.nvars()];
            let mut idx = vec![0usize; schema.arity];
            for flat in valid_tuples(m, schema.arity) {
                if rel.values[flat] {
                    continue;
                }
                unflatten(flat, m, schema.arity, &mut idx);
                for (k, h) in c.head.iter().enumerate() {
                    if let Some(v) = h {
                        vals[*v] = idx[k];
                    }
                }
                if eval_prefix(&c, m, &mut vals, 0) {
                    rel.values[flat] = true;
                }
            }
        }
        facts.insert(schema.name.clone(), rel);
    }
    Ok(FactSet { m, relations: facts })
}

/// Grounds a single clause by tabulating the body on every assignment of
/// distinct objects to its body variables, folding the quantifiers from the
/// innermost outwards, and finally broadcasting over head-only variables.
pub fn brute_force_ground(clause: &HornClause, facts: &FactSet) -> Result<Relation, LogicError> {
    let m = facts.m;
    if clause.num_vars() > m {
        return Err(LogicError::TooManyVariables { vars: clause.num_vars(), m });
    }
    let c = index_clause(clause, &facts.relations)?;
    let n = c.nvars();
    // Table over the full m^n cube; entries off the distinct mask are unused.
    let mut table = vec![false; cube_len(m, n)];
    let mut vals = vec![0usize; n];
    for flat in valid_tuples(m, n) {
        unflatten(flat, m, n, &mut vals);
        let mut all = true;
        for (rel, args, neg) in &c.lits {
            let v = rel.get_flat(flat_of(args, &vals, m)) != *neg;
            all &= v;
        }
        table[flat] = all;
    }
    for (k, q) in c.prefix.iter().enumerate().rev() {
        let arity = c.shared + k;
        let mut next = vec![false; cube_len(m, arity)];
        let mut idx = vec![0usize; arity];
        for flat in valid_tuples(m, arity) {
            unflatten(flat, m, arity, &mut idx);
            let mut acc = *q == Quantifier::Forall;
            for o in 0..m {
                if idx.contains(&o) {
                    continue;
                }
                let v = table[flat * m + o];
                acc = match q {
                    Quantifier::Forall => acc & v,
                    Quantifier::Exists => acc | v,
                };
            }
            next[flat] = acc;
        }
        table = next;
    }
    let arity = clause.head.args.len();
    let mut rel = Relation::empty(arity, m);
    let mut idx = vec![0usize; arity];
    let mut shared = vec![0usize; c.shared];
    for flat in valid_tuples(m, arity) {
        unflatten(flat, m, arity, &mut idx);
        for (k, h) in c.head.iter().enumerate() {
            if let Some(v) = h {
                shared[*v] = idx[k];
            }
        }
        rel.values[flat] = table[flatten(&shared, m)];
    }
    Ok(rel)
}

/// Program evaluation built from [`brute_force_ground`] alone, as an
/// independent reference for [`forward_chain`].
pub fn brute_force_chain(program: &HornProgram, base: &FactSet) -> Result<FactSet, LogicError> {
    check_base(program, base)?;
    let mut facts = base.clone();
    for schema in &program.derived {
        let mut rel = Relation::empty(schema.arity, facts.m);
        for clause in program.clauses.iter().filter(|c| c.head.predicate == schema.name) {
            let part = brute_force_ground(clause, &facts)?;
            for (a, b) in rel.values.iter_mut().zip(&part.values) {
                *a |= *b;
            }
        }
        facts.relations.insert(schema.name.clone(), rel);
    }
    Ok(facts)
}
