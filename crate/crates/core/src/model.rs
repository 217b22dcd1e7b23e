//! The multi-layer, multi-group machine and its output heads.
//!
//! Layer `i` computes, for every arity `r <= B`,
//!
//! ```text
//! I_i^(r) = concat(expand(O_{i-1}^(r-1)), O_{i-1}^(r), reduce(O_{i-1}^(r+1)))
//! O_i^(r) = sigmoid-MLP(permute_all(I_i^(r)))
//! ```
//!
//! With residual links on, `O_i^(r)` is additionally prefixed by
//! `O_{i-1}^(r)`, so widths grow layer by layer.

use crate::autodiff::{Activation, AutodiffError, Binding, MlpParams, ParamId, Params, Tape, Var};
use crate::rng::{derive, rng_from};
use crate::tensor::{factorial, falling, PredTensor, TensorError};
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("invalid config: {0}")]
    Config(String),
    #[error("premise for arity {arity} has {got} channels, config expects {expected}")]
    PremiseChannels { arity: usize, expected: usize, got: usize },
    #[error("premises disagree on the number of objects")]
    PremiseObjects,
    #[error("{m} objects cannot host breadth {breadth}")]
    TooFewObjects { m: usize, breadth: usize },
    #[error("output has no arity-{0} group")]
    MissingGroup(usize),
    #[error("bad head input: {0}")]
    HeadInput(String),
    #[error(transparent)]
    Autodiff(#[from] AutodiffError),
    #[error(transparent)]
    Tensor(#[from] TensorError),
}

fn default_channels() -> usize {
    8
}

/// Output head carried by a model.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum HeadConfig {
    /// Two-class logits per object (arity 1) or per ordered pair (arity 2).
    Classify { arity: usize },
    /// Scores over ordered pairs of distinct objects from the binary group.
    PairAction,
    /// Scores over single objects from the unary group.
    ObjectAction,
    /// Blocks-world move head: object representations of the two worlds are
    /// joined per block id, paired, passed through a sigmoid layer of width
    /// `hidden` and scored; a validity logit shares the hidden layer.
    BlocksAction { hidden: usize },
}

impl HeadConfig {
    /// The last-layer arity group the head reads.
    pub fn arity(&self) -> usize {
        match self {
            HeadConfig::Classify { arity } => *arity,
            HeadConfig::PairAction => 2,
            HeadConfig::ObjectAction | HeadConfig::BlocksAction { .. } => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NlmConfig {
    pub depth: usize,
    pub breadth: usize,
    /// Output channels per group when no explicit plan is given.
    #[serde(default = "default_channels")]
    pub channels: usize,
    /// Optional `[layer][arity]` channel counts, overriding `channels`.
    #[serde(default)]
    pub channel_plan: Option<Vec<Vec<usize>>>,
    #[serde(default)]
    pub residual: bool,
    #[serde(default)]
    pub mlp_hidden: Option<usize>,
    /// Premise channels per arity `0..=breadth`.
    pub input_channels: Vec<usize>,
    pub head: HeadConfig,
}

impl NlmConfig {
    /// Config with uniform width 8 and no hidden layer. `inputs` lists
    /// premise channels from arity 0 upward and is zero-padded to `breadth`.
    pub fn new(depth: usize, breadth: usize, residual: bool, inputs: &[usize], head: HeadConfig) -> Self {
        let mut input_channels = inputs.to_vec();
        input_channels.resize(breadth + 1, 0);
        Self {
            depth,
            breadth,
            channels: default_channels(),
            channel_plan: None,
            residual,
            mlp_hidden: None,
            input_channels,
            head,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |s: String| Err(ModelError::Config(s));
        if self.depth == 0 {
            return bad("depth must be at least 1".into());
        }
        if self.input_channels.len() != self.breadth + 1 {
            return bad(format!("input_channels needs {} entries, has {}", self.breadth + 1, self.input_channels.len()));
        }
        if let Some(plan) = &self.channel_plan {
            if plan.len() != self.depth || plan.iter().any(|l| l.len() != self.breadth + 1) {
                return bad(format!("channel_plan must be {} x {}", self.depth, self.breadth + 1));
            }
        }
        if self.mlp_hidden == Some(0) {
            return bad("mlp_hidden must be positive".into());
        }
        match &self.head {
            HeadConfig::Classify { arity } if *arity == 0 || *arity > 2 => {
                return bad(format!("classify head arity must be 1 or 2, got {arity}"))
            }
            HeadConfig::BlocksAction { hidden: 0 } => return bad("blocks head needs a hidden width".into()),
            _ => {}
        }
        if self.head.arity() > self.breadth {
            return bad(format!("head reads arity {} but breadth is {}", self.head.arity(), self.breadth));
        }
        if self.widths().last().map_or(0, |w| w[self.head.arity()]) == 0 {
            return bad("head group has zero width".into());
        }
        Ok(())
    }

    /// Output channels `C_i^(r)` of layer `i` (1-based), before residual.
    pub fn layer_channels(&self, layer: usize, arity: usize) -> usize {
        match &self.channel_plan {
            Some(plan) => plan[layer - 1][arity],
            None => self.channels,
        }
    }

    /// Realized widths `W_i^(r)` for `i = 0..=depth` (row 0 = premises).
    pub fn widths(&self) -> Vec<Vec<usize>> {
        let mut out = Vec::with_capacity(self.depth + 1);
        out.push(self.input_channels.clone());
        for i in 1..=self.depth {
            let prev = &out[i - 1];
            let row = (0..=self.breadth)
                .map(|r| self.layer_channels(i, r) + if self.residual { prev[r] } else { 0 })
                .collect();
            out.push(row);
        }
        out
    }

    /// Width `C~_i^(r)` of the inter-group input at layer `i`.
    pub fn inter_width(&self, widths: &[Vec<usize>], layer: usize, arity: usize) -> usize {
        let prev = &widths[layer - 1];
        let mut w = prev[arity];
        if arity > 0 {
            w += prev[arity - 1];
        }
        if arity < self.breadth {
            w += 2 * prev[arity + 1];
        }
        w
    }

    /// Which groups of each layer `0..=depth` must be computed for the head.
    pub fn needed_groups(&self) -> Vec<Vec<bool>> {
        let b = self.breadth;
        let mut need = vec![vec![false; b + 1]; self.depth + 1];
        need[self.depth][self.head.arity()] = true;
        for i in (1..=self.depth).rev() {
            for r in 0..=b {
                if need[i][r] {
                    for s in r.saturating_sub(1)..=(r + 1).min(b) {
                        need[i - 1][s] = true;
                    }
                }
            }
        }
        need
    }
}

/// Multiply-accumulate and parameter counts predicted from the shape laws.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CostEstimate {
    pub macs: u64,
    pub params: u64,
}

/// Predicted cost of one forward pass over `m` objects, counting every
/// affine map (layers and head). With `pruned`, groups the head never
/// reads are skipped, as [`Model::forward_tape`] does.
pub fn estimate_cost(config: &NlmConfig, m: usize, pruned: bool) -> CostEstimate {
    let widths = config.widths();
    let need = config.needed_groups();
    let mut macs = 0u64;
    let mut params = 0u64;
    let mlp = |input: usize, output: usize| -> Vec<(usize, usize)> {
        match config.mlp_hidden {
            Some(h) => vec![(input, h), (h, output)],
            None => vec![(input, output)],
        }
    };
    for i in 1..=config.depth {
        for r in 0..=config.breadth {
            let input = factorial(r) * config.inter_width(&widths, i, r);
            for (a, b) in mlp(input, config.layer_channels(i, r)) {
                params += (a * b + b) as u64;
                if !pruned || need[i][r] {
                    macs += (falling(m, r) * a * b) as u64;
                }
            }
        }
    }
    let w = widths[config.depth][config.head.arity()];
    match config.head {
        HeadConfig::Classify { arity } => {
            params += (w * 2 + 2) as u64;
            macs += (falling(m, arity) * w * 2) as u64;
        }
        HeadConfig::PairAction | HeadConfig::ObjectAction => {
            params += (w + 1) as u64;
            macs += (falling(m, config.head.arity()) * w) as u64;
        }
        HeadConfig::BlocksAction { hidden } => {
            // m counts both worlds; ids are m/2 of them.
            let ids = m / 2;
            params += (4 * w * hidden + hidden + 2 * (hidden + 1)) as u64;
            macs += (falling(ids, 2) * (4 * w * hidden + 2 * hidden)) as u64;
        }
    }
    CostEstimate { macs, params }
}

/// Last-layer groups (and optionally every layer) of a forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct NlmOutput {
    /// `O_D^(r)` for `r = 0..=B`.
    pub groups: Vec<PredTensor>,
    /// `O_i^(r)` for `i = 0..=D` when requested.
    pub layers: Option<Vec<Vec<PredTensor>>>,
}

impl NlmOutput {
    pub fn group(&self, arity: usize) -> Result<&PredTensor, ModelError> {
        self.groups.get(arity).ok_or(ModelError::MissingGroup(arity))
    }
}

#[derive(Debug, Clone, PartialEq)]
struct HeadParams {
    /// Classify: `W x 2`; pair/object: `W x 1`; blocks: `4W x hidden`.
    w: ParamId,
    b: ParamId,
    /// Blocks only: score and validity layers over the hidden features.
    score: Option<(ParamId, ParamId)>,
    aux: Option<(ParamId, ParamId)>,
}

/// Extra per-instance input an action head may need.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum HeadInput {
    #[default]
    None,
    /// For each block id `0..=n`, its object index in the operating world
    /// and in the target world.
    Blocks { current: Vec<usize>, target: Vec<usize> },
}

/// Tape handles produced by an action head.
#[derive(Debug, Clone, Copy)]
pub struct ActionOutput {
    /// Log-probabilities over actions; the action index is the data index.
    pub log_probs: Var,
    /// Per-pair validity logits (blocks head only), same layout.
    pub aux_logits: Option<Var>,
}

/// A configured machine together with its parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub config: NlmConfig,
    pub params: Params,
    /// `layers[i-1][r]` is the MLP of layer `i`, arity `r`.
    layers: Vec<Vec<MlpParams>>,
    head: HeadParams,
}

impl Model {
    /// Builds a model with parameters drawn from `seed`. Parameter creation
    /// order (layers by index then arity, then the head) is fixed.
    pub fn new(config: NlmConfig, seed: u64) -> Result<Self, ModelError> {
        config.validate()?;
        let mut rng = rng_from(derive(seed, "model-init"));
        let mut params = Params::new();
        let widths = config.widths();
        let mut layers = Vec::with_capacity(config.depth);
        for i in 1..=config.depth {
            let mut row = Vec::with_capacity(config.breadth + 1);
            for r in 0..=config.breadth {
                let input = factorial(r) * config.inter_width(&widths, i, r);
                row.push(MlpParams::new(
                    &mut params,
                    &format!("layer{i}.arity{r}"),
                    input,
                    config.mlp_hidden,
                    config.layer_channels(i, r),
                    &mut rng,
                ));
            }
            layers.push(row);
        }
        let w = widths[config.depth][config.head.arity()];
        let head = match config.head {
            HeadConfig::Classify { .. } => HeadParams {
                w: params.add_uniform("head.w", w, 2, &mut rng),
                b: params.add_zeros("head.b", 1, 2),
                score: None,
                aux: None,
            },
            HeadConfig::PairAction | HeadConfig::ObjectAction => HeadParams {
                w: params.add_uniform("head.w", w, 1, &mut rng),
                b: params.add_zeros("head.b", 1, 1),
                score: None,
                aux: None,
            },
            HeadConfig::BlocksAction { hidden } => HeadParams {
                w: params.add_uniform("head.w", 4 * w, hidden, &mut rng),
                b: params.add_zeros("head.b", 1, hidden),
                score: Some((params.add_uniform("head.score.w", hidden, 1, &mut rng), params.add_zeros("head.score.b", 1, 1))),
                aux: Some((params.add_uniform("head.aux.w", hidden, 1, &mut rng), params.add_zeros("head.aux.b", 1, 1))),
            },
        };
        Ok(Self { config, params, layers, head })
    }

    /// Checks premises and pads missing trailing arities with empty groups.
    fn prepare(&self, premises: &[PredTensor]) -> Result<Vec<PredTensor>, ModelError> {
        let b = self.config.breadth;
        let m = premises.first().map(|p| p.num_objects()).ok_or(ModelError::PremiseObjects)?;
        if premises.len() > b + 1 {
            return Err(ModelError::Config(format!("{} premise groups for breadth {b}", premises.len())));
        }
        if m < b.max(1) {
            return Err(ModelError::TooFewObjects { m, breadth: b });
        }
        let mut out = Vec::with_capacity(b + 1);
        for r in 0..=b {
            let p = match premises.get(r) {
                Some(p) => p.clone(),
                None => PredTensor::zeros(r, m, 0),
            };
            if p.num_objects() != m || p.arity() != r {
                return Err(ModelError::PremiseObjects);
            }
            if p.channels() != self.config.input_channels[r] {
                return Err(ModelError::PremiseChannels { arity: r, expected: self.config.input_channels[r], got: p.channels() });
            }
            out.push(p);
        }
        Ok(out)
    }

    /// Records `I_i^(r)` on the tape from the previous layer's groups.
    pub fn inter_group(&self, tape: &mut Tape, prev: &[Option<Var>], r: usize) -> Result<Var, ModelError> {
        let b = self.config.breadth;
        let get = |s: usize| prev.get(s).copied().flatten().ok_or(ModelError::MissingGroup(s));
        let mut parts = Vec::with_capacity(3);
        if r > 0 {
            parts.push(tape.expand(get(r - 1)?, b)?);
        }
        parts.push(get(r)?);
        if r < b {
            parts.push(tape.reduce(get(r + 1)?)?);
        }
        Ok(tape.concat(&parts)?)
    }

    /// Records the whole machine; returns `O_D^(r)` for the groups the head
    /// reads (others are `None` when `pruned`).
    pub fn forward_tape(
        &self,
        tape: &mut Tape,
        binding: &Binding,
        premises: &[PredTensor],
        pruned: bool,
    ) -> Result<Vec<Vec<Option<Var>>>, ModelError> {
        let premises = self.prepare(premises)?;
        let need = self.config.needed_groups();
        let mut layers: Vec<Vec<Option<Var>>> = Vec::with_capacity(self.config.depth + 1);
        layers.push(
            premises
                .iter()
                .enumerate()
                .map(|(r, p)| (!pruned || need[0][r]).then(|| tape.constant(p)))
                .collect(),
        );
        for i in 1..=self.config.depth {
            let mut row = Vec::with_capacity(self.config.breadth + 1);
            for r in 0..=self.config.breadth {
                if pruned && !need[i][r] {
                    row.push(None);
                    continue;
                }
                let input = self.inter_group(tape, &layers[i - 1], r)?;
                let permuted = tape.permute_all(input)?;
                let mut out = self.layers[i - 1][r].forward(tape, binding, permuted)?;
                if self.config.residual {
                    let prev = layers[i - 1][r].ok_or(ModelError::MissingGroup(r))?;
                    out = tape.concat(&[prev, out])?;
                }
                row.push(Some(out));
            }
            layers.push(row);
        }
        Ok(layers)
    }

    /// Evaluates every group of every layer without gradients.
    pub fn forward(&self, premises: &[PredTensor], keep_layers: bool) -> Result<NlmOutput, ModelError> {
        let mut tape = Tape::new();
        let binding = tape.bind(&self.params);
        let layers = self.forward_tape(&mut tape, &binding, premises, false)?;
        let read = |row: &Vec<Option<Var>>| row.iter().map(|v| tape.pred(v.expect("unpruned"))).collect::<Vec<_>>();
        let groups = read(layers.last().expect("depth >= 1"));
        let layers = keep_layers.then(|| layers.iter().map(read).collect());
        Ok(NlmOutput { groups, layers })
    }

    fn head_group(&self, tape: &mut Tape, binding: &Binding, premises: &[PredTensor]) -> Result<Var, ModelError> {
        let arity = self.config.head.arity();
        let layers = self.forward_tape(tape, binding, premises, true)?;
        layers[self.config.depth][arity].ok_or(ModelError::MissingGroup(arity))
    }

    /// Two-class logits per tuple of the head arity (classify heads).
    pub fn classify_logits(&self, tape: &mut Tape, binding: &Binding, premises: &[PredTensor]) -> Result<Var, ModelError> {
        if !matches!(self.config.head, HeadConfig::Classify { .. }) {
            return Err(ModelError::Config("model has no classification head".into()));
        }
        let x = self.head_group(tape, binding, premises)?;
        Ok(tape.dense(x, binding.var(self.head.w), binding.var(self.head.b), Activation::Identity)?)
    }

    /// Log-probabilities over actions (action heads).
    pub fn action(
        &self,
        tape: &mut Tape,
        binding: &Binding,
        premises: &[PredTensor],
        input: &HeadInput,
    ) -> Result<ActionOutput, ModelError> {
        let x = self.head_group(tape, binding, premises)?;
        let (w, b) = (binding.var(self.head.w), binding.var(self.head.b));
        match (&self.config.head, input) {
            (HeadConfig::PairAction | HeadConfig::ObjectAction, HeadInput::None) => {
                let scores = tape.dense(x, w, b, Activation::Identity)?;
                Ok(ActionOutput { log_probs: tape.log_softmax(scores), aux_logits: None })
            }
            (HeadConfig::BlocksAction { .. }, HeadInput::Blocks { current, target }) => {
                if current.len() != target.len() || current.len() < 2 {
                    return Err(ModelError::HeadInput("current/target id maps must match and cover >= 2 ids".into()));
                }
                let cur = tape.gather_objects(x, current)?;
                let tgt = tape.gather_objects(x, target)?;
                let rep = tape.concat(&[cur, tgt])?;
                let pair = tape.expand(rep, 2)?;
                let pair = tape.permute_all(pair)?;
                let hidden = tape.dense(pair, w, b, Activation::Sigmoid)?;
                let (sw, sb) = self.head.score.expect("blocks head");
                let (aw, ab) = self.head.aux.expect("blocks head");
                let scores = tape.dense(hidden, binding.var(sw), binding.var(sb), Activation::Identity)?;
                let aux = tape.dense(hidden, binding.var(aw), binding.var(ab), Activation::Identity)?;
                Ok(ActionOutput { log_probs: tape.log_softmax(scores), aux_logits: Some(aux) })
            }
            (HeadConfig::Classify { .. }, _) => Err(ModelError::Config("model has no action head".into())),
            _ => Err(ModelError::HeadInput("head input does not match head kind".into())),
        }
    }

    /// Action probabilities for inference, indexed like [`ActionOutput::log_probs`].
    pub fn action_probs(&self, premises: &[PredTensor], input: &HeadInput) -> Result<Vec<f64>, ModelError> {
        let mut tape = Tape::new();
        let binding = tape.bind(&self.params);
        let out = self.action(&mut tape, &binding, premises, input)?;
        let t = tape.pred(out.log_probs);
        let mut probs = vec![0.0; t.data().len()];
        for flat in crate::tensor::valid_tuples(t.num_objects(), t.arity()) {
            probs[flat] = crate::math::exp(t.data()[flat]);
        }
        Ok(probs)
    }

    /// Class-1 probability per tuple of the head arity, for inference.
    pub fn classify_probs(&self, premises: &[PredTensor]) -> Result<PredTensor, ModelError> {
        let mut tape = Tape::new();
        let binding = tape.bind(&self.params);
        let logits = self.classify_logits(&mut tape, &binding, premises)?;
        let t = tape.pred(logits);
        let (arity, m) = (t.arity(), t.num_objects());
        Ok(PredTensor::from_fn(arity, m, 1, |idx, _| crate::math::sigmoid(t.get(idx, 1) - t.get(idx, 0))))
    }

    /// Shapes of every parameter, in creation order.
    pub fn param_shapes(&self) -> Vec<(String, usize, usize)> {
        self.params.iter().map(|p| (p.name.clone(), p.rows, p.cols)).collect()
    }
}
