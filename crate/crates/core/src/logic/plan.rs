//! Compiles one clause into the expand / boolean / reduce / expand pipeline
//! the machine's layers can realize, and runs such plans on hard tensors.

use super::{FactSet, HornClause, LogicError, Quantifier, Relation};
use crate::tensor::{expand, reduce, AxisPermutation, PredTensor, TensorError};
use alloc::string::String;
use alloc::vec::Vec;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PlanStep {
    /// Expand body literal `literal` with fresh trailing variables `added`,
    /// so it spans every body variable.
    Expand { literal: usize, added: Vec<String> },
    /// Conjoin the (possibly negated) expanded literals after transposing
    /// each into `order`: shared head variables first, then quantified
    /// variables outermost first.
    Boolean { order: Vec<String>, alignments: Vec<AxisPermutation> },
    /// Quantify out the last variable.
    Reduce { var: String, quantifier: Quantifier },
    /// Append a head-only variable.
    FinalExpand { var: String },
    /// Reorder axes into head order.
    FinalPermute { permutation: AxisPermutation },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClausePlan {
    pub clause: HornClause,
    pub steps: Vec<PlanStep>,
    /// Largest arity any intermediate tensor reaches.
    pub max_arity: usize,
}

fn position(names: &[String], v: &str) -> usize {
    names.iter().position(|n| n == v).expect("variable in scope")
}

/// Plans `clause` for a machine of the given breadth.
pub fn compile_clause_plan(clause: &HornClause, breadth: usize) -> Result<ClausePlan, LogicError> {
    let shared = clause.shared_vars();
    let head_only = clause.head_only_vars();
    let mut order: Vec<String> = shared.clone();
    order.extend(clause.prefix.iter().map(|(v, _)| v.clone()));
    let max_arity = order.len().max(clause.head.args.len());
    if max_arity > breadth {
        return Err(LogicError::Breadth { needed: max_arity, breadth });
    }
    let mut steps = Vec::new();
    let mut alignments = Vec::with_capacity(clause.body.len());
    for (i, lit) in clause.body.iter().enumerate() {
        let added: Vec<String> = order.iter().filter(|v| !lit.atom.args.contains(v)).cloned().collect();
        let mut axes = lit.atom.args.clone();
        axes.extend(added.iter().cloned());
        alignments.push(
            AxisPermutation::new(axes.iter().map(|a| position(&order, a)).collect()).expect("axes cover the order"),
        );
        steps.push(PlanStep::Expand { literal: i, added });
    }
    steps.push(PlanStep::Boolean { order: order.clone(), alignments });
    for (v, q) in clause.prefix.iter().rev() {
        steps.push(PlanStep::Reduce { var: v.clone(), quantifier: *q });
    }
    let mut axes = shared;
    for v in head_only {
        steps.push(PlanStep::FinalExpand { var: v.clone() });
        axes.push(v);
    }
    let permutation =
        AxisPermutation::new(axes.iter().map(|a| position(&clause.head.args, a)).collect()).expect("head covers axes");
    if !permutation.is_identity() {
        steps.push(PlanStep::FinalPermute { permutation });
    }
    Ok(ClausePlan { clause: clause.clone(), steps, max_arity })
}

/// Runs a plan with the tensor operators on 0/1 groundings. The boolean
/// step is a hand-set conjunction (product of literals or complements).
pub fn execute_plan(plan: &ClausePlan, facts: &FactSet) -> Result<Relation, LogicError> {
    execute_plan_with(plan, facts, reduce)
}

/// [`execute_plan`] with a substitute for the reduce operator.
pub fn execute_plan_with(
    plan: &ClausePlan,
    facts: &FactSet,
    reduce: fn(&PredTensor) -> Result<PredTensor, TensorError>,
) -> Result<Relation, LogicError> {
    let m = facts.num_objects();
    let vars = plan.clause.num_vars();
    if vars > m {
        return Err(LogicError::TooManyVariables { vars, m });
    }
    let b = plan.max_arity;
    let mut expanded: Vec<Option<PredTensor>> = alloc::vec![None; plan.clause.body.len()];
    let mut current: Option<PredTensor> = None;
    for step in &plan.steps {
        match step {
            PlanStep::Expand { literal, added } => {
                let atom = &plan.clause.body[*literal].atom;
                let rel = facts.get(&atom.predicate).ok_or_else(|| LogicError::UnknownPredicate(atom.predicate.clone()))?;
                let mut t = rel.to_tensor();
                for _ in added {
                    t = expand(&t, b).expect("breadth and object count checked");
                }
                expanded[*literal] = Some(t);
            }
            PlanStep::Boolean { order, alignments } => {
                let aligned: Vec<PredTensor> = expanded
                    .iter()
                    .zip(alignments)
                    .map(|(t, p)| t.as_ref().expect("expanded").transpose(p))
                    .collect();
                let negated: Vec<bool> = plan.clause.body.iter().map(|l| l.negated).collect();
                current = Some(PredTensor::from_fn(order.len(), m, 1, |idx, _| {
                    aligned
                        .iter()
                        .zip(&negated)
                        .map(|(t, &neg)| if neg { 1.0 - t.get(idx, 0) } else { t.get(idx, 0) })
                        .product()
                }));
            }
            PlanStep::Reduce { quantifier, .. } => {
                let t = reduce(&current.take().expect("boolean step ran")).expect("arity >= 1");
                let channel = match quantifier {
                    Quantifier::Exists => 0,
                    Quantifier::Forall => 1,
                };
                current = Some(t.select_channels(&[channel]));
            }
            PlanStep::FinalExpand { .. } => {
                current = Some(expand(&current.take().expect("boolean step ran"), b).expect("checked"));
            }
            PlanStep::FinalPermute { permutation } => {
                current = Some(current.take().expect("boolean step ran").transpose(permutation));
            }
        }
    }
    Ok(Relation::from_tensor(&current.expect("plan has a boolean step"), 0))
}
