//! Self-check suites behind `nlm verify`: finite-difference gradients, the
//! logic oracle cross-checks, the structural shape laws and object
//! permutation equivariance.
//!
//! Every suite returns its checks as data; a failure is a report entry, not
//! an error.

use crate::autodiff::{Activation, Params, Tape, Var};
use crate::logic::random::{random_clause, random_facts, random_program, RandomProgramConfig};
use crate::logic::{
    brute_force_chain, brute_force_ground, compile_clause_plan, execute_plan_with, forward_chain, HornProgram, Schema,
};
use crate::model::{HeadConfig, HeadInput, Model, NlmConfig};
use crate::rng::{derive, rng_from, Rng};
use crate::tasks::{Environment, RlEnv, TaskKind, EnvMode, PRESET_TASKS};
use crate::tensor::{
    all_distinct, concat_channels, cube_len, expand, factorial, permute_all, reduce, unflatten, valid_tuples,
    PredTensor, TensorError,
};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;
use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

#[cfg(test)]
mod tests;

/// Finite-difference step and tolerance of the gradient suite.
pub const FD_STEP: f64 = 1e-5;
pub const FD_REL_TOL: f64 = 1e-4;
/// Below this absolute disagreement two derivatives count as equal (both
/// are zero up to cancellation noise of the central difference).
pub const FD_ABS_FLOOR: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scope {
    Gradcheck,
    Oracle,
    Shapes,
    Equivariance,
    All,
}

impl Scope {
    pub const SUITES: [Scope; 4] = [Scope::Gradcheck, Scope::Oracle, Scope::Shapes, Scope::Equivariance];
}

impl fmt::Display for Scope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scope::Gradcheck => "gradcheck",
            Scope::Oracle => "oracle",
            Scope::Shapes => "shapes",
            Scope::Equivariance => "equivariance",
            Scope::All => "all",
        })
    }
}

impl FromStr for Scope {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "gradcheck" => Ok(Scope::Gradcheck),
            "oracle" => Ok(Scope::Oracle),
            "shapes" => Ok(Scope::Shapes),
            "equivariance" => Ok(Scope::Equivariance),
            "all" => Ok(Scope::All),
            _ => Err(format!("unknown verify scope `{s}` (gradcheck, oracle, shapes, equivariance, all)")),
        }
    }
}

pub type ReduceFn = fn(&PredTensor) -> Result<PredTensor, TensorError>;

#[derive(Debug, Clone, Copy)]
pub struct Options {
    pub seed: u64,
    /// Reduce operator used when executing compiled clause plans; swapping
    /// it lets the oracle suite be mutation-tested.
    pub reduce: ReduceFn,
    pub random_programs: usize,
    pub random_clauses: usize,
}

impl Default for Options {
    fn default() -> Self {
        Self { seed: 0, reduce, random_programs: 200, random_clauses: 100 }
    }
}

/// One property outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub suite: Scope,
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(suite: Scope, name: impl Into<String>, result: Result<String, String>) -> Self {
        let (passed, detail) = match result {
            Ok(d) => (true, d),
            Err(d) => (false, d),
        };
        Self { suite, name: name.into(), passed, detail }
    }
}

pub fn run(scope: Scope, opts: &Options) -> Vec<Check> {
    match scope {
        Scope::Gradcheck => gradcheck(opts),
        Scope::Oracle => oracle(opts),
        Scope::Shapes => shapes(opts),
        Scope::Equivariance => equivariance(opts),
        Scope::All => Scope::SUITES.iter().flat_map(|&s| run(s, opts)).collect(),
    }
}

pub fn all_passed(checks: &[Check]) -> bool {
    checks.iter().all(|c| c.passed)
}

/// A deliberately wrong reduce that quantifies over the masked diagonal
/// entries too, so their stored zeros act as the neutral element of `min`.
pub fn reduce_including_masked(t: &PredTensor) -> Result<PredTensor, TensorError> {
    if t.arity() == 0 {
        return Err(TensorError::ReduceNullary);
    }
    let (r, m, c) = (t.arity() - 1, t.num_objects(), t.channels());
    let mut data = vec![0.0; cube_len(m, r) * 2 * c];
    for flat in valid_tuples(m, r) {
        for ch in 0..c {
            let vals = (0..m).map(|y| t.data()[(flat * m + y) * c + ch]);
            data[flat * 2 * c + ch] = vals.clone().fold(f64::NEG_INFINITY, f64::max);
            data[flat * 2 * c + c + ch] = vals.fold(f64::INFINITY, f64::min);
        }
    }
    PredTensor::from_raw(r, m, 2 * c, data)
}

fn random_pred(rng: &mut Rng, arity: usize, m: usize, c: usize) -> PredTensor {
    PredTensor::from_fn(arity, m, c, |_, _| rng.random_range(0.05..0.95))
}

/// Premises mixing hard 0/1 facts and soft values.
fn random_premises(rng: &mut Rng, inputs: &[usize], m: usize) -> Vec<PredTensor> {
    inputs
        .iter()
        .enumerate()
        .map(|(r, &c)| {
            PredTensor::from_fn(r, m, c, |_, _| if rng.random_bool(0.5) { f64::from(rng.random_bool(0.5)) } else { rng.random() })
        })
        .collect()
}

fn random_relabeling(rng: &mut Rng, m: usize) -> Vec<usize> {
    let mut pi: Vec<usize> = (0..m).collect();
    pi.shuffle(rng);
    pi
}

// ---- gradcheck ---------------------------------------------------------

#[derive(Debug, Clone, Copy, Default)]
struct FdStats {
    compared: usize,
    worst_rel: f64,
}

impl FdStats {
    fn compare(&mut self, fd: f64, an: f64) -> Result<(), String> {
        self.compared += 1;
        let diff = (fd - an).abs();
        if diff <= FD_ABS_FLOOR {
            return Ok(());
        }
        let rel = diff / fd.abs().max(an.abs());
        self.worst_rel = self.worst_rel.max(rel);
        if rel > FD_REL_TOL {
            return Err(format!("finite difference {fd:e} vs analytic {an:e} (relative error {rel:.2e})"));
        }
        Ok(())
    }

    fn summary(&self) -> String {
        format!("{} derivatives, worst relative error {:.2e}", self.compared, self.worst_rel)
    }
}

/// Central differences of `f` w.r.t. every valid entry of `x`.
fn check_input_gradient(x: &PredTensor, f: &dyn Fn(&mut Tape, Var) -> Var) -> Result<String, String> {
    let mut tape = Tape::new();
    let xv = tape.variable(x);
    let loss = f(&mut tape, xv);
    let grads = tape.backward(loss).map_err(|e| e.to_string())?;
    let analytic = grads.get(xv).map(|g| g.to_vec()).unwrap_or_else(|| vec![0.0; x.data().len()]);
    let eval = |data: Vec<f64>| {
        let t = PredTensor::from_raw(x.arity(), x.num_objects(), x.channels(), data).expect("same shape");
        let mut tape = Tape::new();
        let v = tape.variable(&t);
        let l = f(&mut tape, v);
        tape.scalar(l)
    };
    let c = x.channels().max(1);
    let mut idx = vec![0; x.arity()];
    let mut stats = FdStats::default();
    for i in 0..x.data().len() {
        unflatten(i / c, x.num_objects(), x.arity(), &mut idx);
        if !all_distinct(&idx) {
            continue;
        }
        let mut plus = x.data().to_vec();
        plus[i] += FD_STEP;
        let mut minus = x.data().to_vec();
        minus[i] -= FD_STEP;
        let fd = (eval(plus) - eval(minus)) / (2.0 * FD_STEP);
        stats.compare(fd, analytic[i]).map_err(|e| format!("entry {i}: {e}"))?;
    }
    Ok(stats.summary())
}

/// Central differences of `loss` w.r.t. every parameter scalar.
fn check_param_gradient(params: &Params, loss: &dyn Fn(&Params) -> (f64, Vec<Vec<f64>>)) -> Result<String, String> {
    let (_, analytic) = loss(params);
    let mut stats = FdStats::default();
    let mut probe = params.clone();
    for (pi, p) in params.iter().enumerate() {
        for i in 0..p.data.len() {
            let orig = p.data[i];
            let param = probe.get_mut(crate::autodiff::ParamId(pi));
            param.data[i] = orig + FD_STEP;
            let fp = loss(&probe).0;
            probe.get_mut(crate::autodiff::ParamId(pi)).data[i] = orig - FD_STEP;
            let fm = loss(&probe).0;
            probe.get_mut(crate::autodiff::ParamId(pi)).data[i] = orig;
            let fd = (fp - fm) / (2.0 * FD_STEP);
            stats.compare(fd, analytic[pi][i]).map_err(|e| format!("{}[{i}]: {e}", p.name))?;
        }
    }
    Ok(stats.summary())
}

/// A smooth read-out with distinct per-channel weights.
fn weighted_sum(tape: &mut Tape, v: Var, salt: f64) -> Var {
    let width = tape.pred(v).channels();
    let w = tape.matrix(width, 1, (0..width).map(|k| 0.3 + 0.17 * k as f64 - salt).collect());
    let b = tape.matrix(1, 1, vec![0.1]);
    let s = tape.dense(v, w, b, Activation::Sigmoid).expect("matching width");
    tape.sum(s)
}

pub fn gradcheck(opts: &Options) -> Vec<Check> {
    let mut rng = rng_from(derive(opts.seed, "verify-gradcheck"));
    let mut checks = Vec::new();
    let mut prim = |name: &str, x: PredTensor, f: &dyn Fn(&mut Tape, Var) -> Var| {
        checks.push(Check::new(Scope::Gradcheck, format!("primitive/{name}"), check_input_gradient(&x, f)));
    };
    let t3 = random_pred(&mut rng, 3, 4, 2);
    let t2 = random_pred(&mut rng, 2, 4, 3);
    let t1 = random_pred(&mut rng, 1, 4, 3);
    let t0 = random_pred(&mut rng, 0, 4, 2);
    prim("permute", t3.clone(), &|tape, v| {
        let p = tape.permute_all(v).unwrap();
        weighted_sum(tape, p, 0.01)
    });
    prim("reduce", t3.clone(), &|tape, v| {
        let r = tape.reduce(v).unwrap();
        weighted_sum(tape, r, 0.02)
    });
    prim("expand", t1.clone(), &|tape, v| {
        let e = tape.expand(v, 3).unwrap();
        let p = tape.permute_all(e).unwrap();
        weighted_sum(tape, p, 0.03)
    });
    prim("expand-nullary", t0, &|tape, v| {
        let e = tape.expand(v, 1).unwrap();
        weighted_sum(tape, e, 0.04)
    });
    prim("concat-sigmoid", t2.clone(), &|tape, v| {
        let s = tape.sigmoid(v);
        let c = tape.concat(&[v, s]).unwrap();
        weighted_sum(tape, c, 0.05)
    });
    prim("gather", t1.clone(), &|tape, v| {
        let g = tape.gather_objects(v, &[2, 0, 0, 3]).unwrap();
        weighted_sum(tape, g, 0.06)
    });
    prim("dense-input", t2.clone(), &|tape, v| {
        let w = tape.matrix(3, 2, vec![0.5, -0.3, 0.8, 0.1, -0.7, 0.4]);
        let b = tape.matrix(1, 2, vec![0.05, -0.1]);
        let y = tape.dense(v, w, b, Activation::Sigmoid).unwrap();
        weighted_sum(tape, y, 0.07)
    });
    prim("softmax-xent", t2.clone(), &|tape, v| {
        let w = tape.matrix(3, 2, vec![0.9, -0.2, 0.3, 0.6, -0.5, 0.4]);
        let b = tape.matrix(1, 2, vec![0.0, 0.1]);
        let y = tape.dense(v, w, b, Activation::Identity).unwrap();
        tape.softmax_xent(y, &[(1, 0), (3, 1), (7, 1), (14, 0)]).unwrap()
    });
    prim("bce", t2.clone(), &|tape, v| tape.bce_with_logits(v, &[(2, 1.0), (3, 0.0), (11, 1.0)]));
    prim("log-softmax-pick-entropy", t2, &|tape, v| {
        let l = tape.log_softmax(v);
        let a = tape.pick(l, 5);
        let h = tape.entropy(l);
        tape.lin(&[(a, 0.7), (h, 0.3)]).unwrap()
    });

    // Full machine, every parameter, every final group read out.
    let mut cfg = NlmConfig::new(3, 3, true, &[1, 2, 2, 1], HeadConfig::Classify { arity: 1 });
    cfg.channels = 4;
    checks.push(Check::new(Scope::Gradcheck, "model/m4-b3-d3-c4-residual", full_model_gradcheck(cfg, 4, &mut rng)));
    let mut cfg = NlmConfig::new(2, 2, false, &[1, 1, 2], HeadConfig::Classify { arity: 2 });
    cfg.channels = 3;
    cfg.mlp_hidden = Some(3);
    checks.push(Check::new(Scope::Gradcheck, "model/hidden-mlp", full_model_gradcheck(cfg, 4, &mut rng)));

    for (name, task) in [("head/pair", TaskKind::Sorting), ("head/object", TaskKind::Path), ("head/blocks", TaskKind::BlocksWorld)] {
        checks.push(Check::new(Scope::Gradcheck, name, action_head_gradcheck(task, &mut rng)));
    }
    checks
}

fn full_model_gradcheck(cfg: NlmConfig, m: usize, rng: &mut Rng) -> Result<String, String> {
    let model = Model::new(cfg.clone(), rng.random()).map_err(|e| e.to_string())?;
    let premises = random_premises(rng, &cfg.input_channels, m);
    let arity = cfg.head.arity();
    let labels: Vec<(usize, usize)> = valid_tuples(m, arity).into_iter().map(|f| (f, rng.random_range(0..2))).collect();
    let loss = |params: &Params| {
        let mut tape = Tape::new();
        let binding = tape.bind(params);
        let layers = model.forward_tape(&mut tape, &binding, &premises, false).expect("valid premises");
        let mut terms = Vec::new();
        for (r, v) in layers[cfg.depth].iter().enumerate() {
            let v = v.expect("unpruned");
            if tape.pred(v).channels() > 0 {
                terms.push((weighted_sum(&mut tape, v, 0.01 * r as f64), 1.0));
            }
        }
        let logits = model.classify_logits(&mut tape, &binding, &premises).expect("classify head");
        terms.push((tape.softmax_xent(logits, &labels).expect("labels in range"), 1.0));
        let total = tape.lin(&terms).expect("scalars");
        let grads = tape.backward(total).expect("scalar loss");
        (tape.scalar(total), grads.for_params(params, &binding))
    };
    // The loss closure reads the model's structure but takes parameters explicitly.
    check_param_gradient(&model.params, &loss)
}

fn action_head_gradcheck(task: TaskKind, rng: &mut Rng) -> Result<String, String> {
    let mut cfg = task.model_config().map_err(|e| e.to_string())?;
    cfg.depth = 2;
    cfg.channels = 3;
    let model = Model::new(cfg, rng.random()).map_err(|e| e.to_string())?;
    let size = if task == TaskKind::BlocksWorld { 2 } else { 4 };
    let env = RlEnv::generate(task, size, rng.random(), EnvMode::Train).map_err(|e| e.to_string())?;
    let obs = env.observe();
    let input = env.head_input();
    let actions = env.num_actions();
    let legal: Vec<usize> = (0..actions).filter(|&a| model.action_probs(&obs, &input).unwrap()[a] > 0.0).collect();
    let action = legal[rng.random_range(0..legal.len())];
    let loss = |params: &Params| {
        let mut tape = Tape::new();
        let binding = tape.bind(params);
        let out = model.action(&mut tape, &binding, &obs, &input).expect("matching head");
        let logp = tape.pick(out.log_probs, action);
        let h = tape.entropy(out.log_probs);
        let mut terms = vec![(logp, -0.8), (h, -0.2)];
        if let Some(aux) = out.aux_logits {
            let targets: Vec<(usize, f64)> = legal.iter().map(|&a| (a, f64::from(env.applies(a)))).collect();
            terms.push((tape.bce_with_logits(aux, &targets), 0.1));
        }
        let total = tape.lin(&terms).expect("scalars");
        let grads = tape.backward(total).expect("scalar loss");
        (tape.scalar(total), grads.for_params(params, &binding))
    };
    check_param_gradient(&model.params, &loss)
}

// ---- oracle ------------------------------------------------------------

pub fn oracle(opts: &Options) -> Vec<Check> {
    let mut rng = rng_from(derive(opts.seed, "verify-oracle"));
    let mut checks = Vec::new();

    let mut mismatches = Vec::new();
    for k in 0..opts.random_programs {
        let cfg = RandomProgramConfig { max_arity: 2 + (k % 2), ..Default::default() };
        let program = random_program(&mut rng, &cfg);
        let m = rng.random_range(cfg.max_vars..=5);
        let facts = random_facts(&mut rng, &program, m, 0.4);
        let fast = forward_chain(&program, &facts);
        let slow = brute_force_chain(&program, &facts);
        if fast != slow {
            mismatches.push(k);
        }
    }
    checks.push(Check::new(
        Scope::Oracle,
        "forward-chain-vs-brute-force",
        if mismatches.is_empty() {
            Ok(format!("{} random stratified programs, m <= 5", opts.random_programs))
        } else {
            Err(format!("{} of {} programs differ (first: #{})", mismatches.len(), opts.random_programs, mismatches[0]))
        },
    ));

    let cfg = RandomProgramConfig { max_arity: 3, max_vars: 4, ..Default::default() };
    let vocab: Vec<Schema> = (0..4).map(|a| Schema { name: format!("B{a}"), arity: a }).collect();
    let (mut bad, mut first, mut masked) = (0, None, 0);
    let mut quantified = 0;
    for _ in 0..opts.random_clauses {
        let head = Schema { name: "H".into(), arity: rng.random_range(0..=3) };
        let clause = random_clause(&mut rng, &head, &vocab, &cfg);
        // m = 4 leaves a four-variable clause an empty quantifier domain.
        let m = rng.random_range(4..=5);
        let program = HornProgram::new(vec![clause.clone()]).expect("single clause");
        let facts = random_facts(&mut rng, &program, m, 0.5);
        let plan = compile_clause_plan(&clause, 4).expect("fits breadth 4");
        quantified += usize::from(!clause.prefix.is_empty());
        let got = execute_plan_with(&plan, &facts, opts.reduce);
        let want = brute_force_ground(&clause, &facts);
        if got != want {
            bad += 1;
            masked += usize::from(!clause.prefix.is_empty());
            first.get_or_insert_with(|| clause.to_string());
        }
    }
    checks.push(Check::new(
        Scope::Oracle,
        "compiled-plans-vs-brute-force",
        match first {
            None => Ok(format!("{} random clauses ({quantified} quantified)", opts.random_clauses)),
            Some(c) => Err(format!("{bad} of {} clauses differ, {masked} with quantifiers; first: {c}", opts.random_clauses)),
        },
    ));

    // The ShouldMove fixture on random blocks worlds.
    let fixture = crate::logic::shouldmove_fixture();
    let mut diff = 0;
    for k in 0..20 {
        let env = crate::tasks::BlocksEnv::generate(1 + k % 3, rng.random()).expect("blocks");
        let facts = env.facts();
        if forward_chain(&fixture, &facts) != brute_force_chain(&fixture, &facts) {
            diff += 1;
        }
    }
    checks.push(Check::new(
        Scope::Oracle,
        "shouldmove-fixture",
        if diff == 0 { Ok("20 blocks worlds".into()) } else { Err(format!("{diff} of 20 worlds differ")) },
    ));
    checks
}

// ---- shapes ------------------------------------------------------------

fn shape_premises(rng: &mut Rng, cfg: &NlmConfig, m: usize) -> Vec<PredTensor> {
    random_premises(rng, &cfg.input_channels, m)
}

fn preset_size(cfg: &NlmConfig) -> usize {
    cfg.breadth.max(2) + 2
}

fn preset_shape_laws(task: TaskKind, rng: &mut Rng) -> Result<String, String> {
    let cfg = task.model_config().map_err(|e| e.to_string())?;
    let model = Model::new(cfg.clone(), rng.random()).map_err(|e| e.to_string())?;
    let m = preset_size(&cfg);
    let premises = shape_premises(rng, &cfg, m);
    let mut tape = Tape::new();
    let binding = tape.bind(&model.params);
    let layers = model.forward_tape(&mut tape, &binding, &premises, false).map_err(|e| e.to_string())?;
    // Realized widths, independently of the config's own bookkeeping.
    let b = cfg.breadth;
    let mut width: Vec<usize> = cfg.input_channels.clone();
    for i in 1..=cfg.depth {
        let mut next = vec![0; b + 1];
        for r in 0..=b {
            let below = if r > 0 { width[r - 1] } else { 0 };
            let above = if r < b { 2 * width[r + 1] } else { 0 };
            let expected = below + width[r] + above;
            let inter = model.inter_group(&mut tape, &layers[i - 1], r).map_err(|e| e.to_string())?;
            let got = tape.pred(inter).channels();
            if got != expected {
                return Err(format!("layer {i} arity {r}: inter-group width {got}, expected {expected}"));
            }
            let permuted = tape.permute_all(inter).map_err(|e| e.to_string())?;
            if tape.pred(permuted).channels() != factorial(r) * expected {
                return Err(format!("layer {i} arity {r}: permuted width is not r! times {expected}"));
            }
            next[r] = cfg.layer_channels(i, r) + if cfg.residual { width[r] } else { 0 };
            let out = tape.pred(layers[i][r].expect("unpruned"));
            if out.channels() != next[r] || out.arity() != r || out.num_objects() != m {
                return Err(format!("layer {i} arity {r}: output has {} channels, expected {}", out.channels(), next[r]));
            }
        }
        width = next;
    }
    Ok(format!("depth {}, breadth {}, residual {}, head widths {:?}", cfg.depth, cfg.breadth, cfg.residual, width))
}

fn reduce_expand_identity(breadth: usize, rng: &mut Rng) -> Result<String, String> {
    let m = breadth + 2;
    for r in 0..breadth {
        let t = random_pred(rng, r, m, 3);
        let back = reduce(&expand(&t, breadth).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
        let want = concat_channels(&[&t, &t]).map_err(|e| e.to_string())?;
        if back != want {
            return Err(format!("reduce(expand(t)) != [t, t] at arity {r}"));
        }
    }
    Ok(format!("arities 0..{breadth}, m = {m}"))
}

fn m_independence(task: TaskKind, rng: &mut Rng) -> Result<String, String> {
    let cfg = task.model_config().map_err(|e| e.to_string())?;
    let model = Model::new(cfg.clone(), rng.random()).map_err(|e| e.to_string())?;
    let shapes = model.param_shapes();
    let sizes = [preset_size(&cfg), preset_size(&cfg) + 3];
    let mut widths = Vec::new();
    for m in sizes {
        let out = model.forward(&shape_premises(rng, &cfg, m), false).map_err(|e| e.to_string())?;
        widths.push(out.groups.iter().map(|g| g.channels()).collect::<Vec<_>>());
        if out.groups.iter().any(|g| g.num_objects() != m) {
            return Err(format!("outputs are not grounded on m = {m}"));
        }
    }
    if widths[0] != widths[1] {
        return Err(format!("output widths depend on m: {:?} vs {:?}", widths[0], widths[1]));
    }
    if model.param_shapes() != shapes {
        return Err("parameter shapes changed".into());
    }
    let rebuilt = Model::new(cfg, 0).map_err(|e| e.to_string())?;
    if rebuilt.param_shapes() != shapes {
        return Err("parameter shapes depend on the init seed".into());
    }
    Ok(format!("{} parameters, m in {:?}", model.params.scalar_count(), sizes))
}

pub fn shapes(opts: &Options) -> Vec<Check> {
    let mut rng = rng_from(derive(opts.seed, "verify-shapes"));
    let mut checks = Vec::new();
    for task in PRESET_TASKS {
        checks.push(Check::new(Scope::Shapes, format!("channel-arithmetic/{task}"), preset_shape_laws(task, &mut rng)));
        let b = task.model_config().map(|c| c.breadth).unwrap_or(0);
        checks.push(Check::new(Scope::Shapes, format!("reduce-expand/{task}"), reduce_expand_identity(b, &mut rng)));
        checks.push(Check::new(Scope::Shapes, format!("m-independence/{task}"), m_independence(task, &mut rng)));
    }
    checks
}

// ---- equivariance ------------------------------------------------------

fn operator_equivariance(rng: &mut Rng) -> Result<String, String> {
    let m = 5;
    for r in 0..=3 {
        let t = random_pred(rng, r, m, 2);
        let pi = random_relabeling(rng, m);
        let moved = t.relabel(&pi).map_err(|e| e.to_string())?;
        let check = |name: &str, a: PredTensor, b: PredTensor| {
            if a.relabel(&pi).ok() == Some(b) {
                Ok(())
            } else {
                Err(format!("{name} at arity {r}"))
            }
        };
        check("permute", permute_all(&t), permute_all(&moved))?;
        if r < 3 {
            check("expand", expand(&t, 3).unwrap(), expand(&moved, 3).unwrap())?;
        }
        if r > 0 {
            check("reduce", reduce(&t).unwrap(), reduce(&moved).unwrap())?;
        }
    }
    Ok("permute, expand, reduce at arities 0..=3, m = 5".into())
}

/// Exact equality of every final group under a random relabeling; action
/// heads are compared to within a few ulps since softmax sums reorder.
fn model_equivariance(task: TaskKind, rng: &mut Rng) -> Result<String, String> {
    let cfg = task.model_config().map_err(|e| e.to_string())?;
    let model = Model::new(cfg.clone(), rng.random()).map_err(|e| e.to_string())?;
    let m = preset_size(&cfg) + 1;
    let premises = shape_premises(rng, &cfg, m);
    let pi = random_relabeling(rng, m);
    let moved: Vec<PredTensor> = premises.iter().map(|p| p.relabel(&pi).unwrap()).collect();
    let a = model.forward(&premises, false).map_err(|e| e.to_string())?;
    let b = model.forward(&moved, false).map_err(|e| e.to_string())?;
    for (r, (x, y)) in a.groups.iter().zip(&b.groups).enumerate() {
        if &x.relabel(&pi).unwrap() != y {
            return Err(format!("final group of arity {r} is not equivariant"));
        }
    }
    let close = |p: &[f64], q: &[f64]| p.iter().zip(q).all(|(u, v)| (u - v).abs() <= 1e-12);
    match cfg.head {
        HeadConfig::Classify { arity } => {
            let p = model.classify_probs(&premises).unwrap().relabel(&pi).unwrap();
            let q = model.classify_probs(&moved).unwrap();
            if p != q {
                return Err(format!("classify head of arity {arity} is not equivariant"));
            }
        }
        HeadConfig::PairAction | HeadConfig::ObjectAction => {
            let arity = cfg.head.arity();
            let p = model.action_probs(&premises, &HeadInput::None).unwrap();
            let q = model.action_probs(&moved, &HeadInput::None).unwrap();
            let p = PredTensor::from_raw(arity, m, 1, p).unwrap().relabel(&pi).unwrap();
            if !close(p.data(), &q) {
                return Err("action distribution is not equivariant".into());
            }
        }
        HeadConfig::BlocksAction { .. } => {
            // Block ids are not relabeled; only their object indices move.
            let ids = m / 2;
            let current: Vec<usize> = (0..ids).collect();
            let target: Vec<usize> = (ids..2 * ids).collect();
            let input = HeadInput::Blocks { current: current.clone(), target: target.clone() };
            let moved_input = HeadInput::Blocks {
                current: current.iter().map(|&o| pi[o]).collect(),
                target: target.iter().map(|&o| pi[o]).collect(),
            };
            let p = model.action_probs(&premises, &input).unwrap();
            let q = model.action_probs(&moved, &moved_input).unwrap();
            if !close(&p, &q) {
                return Err("blocks action distribution changed under relabeling".into());
            }
        }
    }
    Ok(format!("m = {m}"))
}

pub fn equivariance(opts: &Options) -> Vec<Check> {
    let mut rng = rng_from(derive(opts.seed, "verify-equivariance"));
    let mut checks = vec![Check::new(Scope::Equivariance, "operators", operator_equivariance(&mut rng))];
    for task in PRESET_TASKS {
        checks.push(Check::new(Scope::Equivariance, format!("model/{task}"), model_equivariance(task, &mut rng)));
    }
    checks
}
