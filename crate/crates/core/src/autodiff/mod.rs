//! Reverse-mode differentiation over predicate tensors.
//!
//! A [`Tape`] records each operation as a node holding its forward value.
//! Nodes are appended in evaluation order, so the node list is already a
//! topological order and [`Tape::backward`] walks it once in reverse.
//!
//! The op set is deliberately small: the three lifted operators, a pointwise
//! affine map (optionally followed by a sigmoid), and the losses and policy
//! terms the trainers need.

mod adam;
mod mlp;

pub use adam::{Adam, AdamConfig};
pub use mlp::{mlp_forward, MlpParams};

use crate::math;
use crate::tensor::{self, cube_len, valid_tuples, PredTensor, NO_SOURCE};
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use rand::Rng;
use thiserror::Error;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AutodiffError {
    #[error("loss node must be a scalar")]
    NotScalar,
    #[error("shape mismatch in {op}: {detail}")]
    Shape { op: &'static str, detail: String },
    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },
    #[error("need at least two logits, got {0}")]
    TooFewLogits(usize),
    #[error("non-finite gradient for parameter `{name}`; step rejected")]
    NonFiniteGradient { name: String },
    #[error("gradient list has {got} entries, expected {expected}")]
    GradientCount { expected: usize, got: usize },
    #[error(transparent)]
    Tensor(#[from] tensor::TensorError),
}

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Handle to a parameter inside [`Params`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ParamId(pub usize);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Param {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

/// Ordered collection of named parameter matrices.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Params {
    entries: Vec<Param>,
}

impl Params {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, rows: usize, cols: usize, data: Vec<f64>) -> ParamId {
        assert_eq!(data.len(), rows * cols, "parameter data does not match its shape");
        self.entries.push(Param { name: name.into(), rows, cols, data });
        ParamId(self.entries.len() - 1)
    }

    /// Adds a matrix drawn uniformly from `[-1/sqrt(rows), 1/sqrt(rows)]`.
    pub fn add_uniform<R: Rng + ?Sized>(&mut self, name: impl Into<String>, rows: usize, cols: usize, rng: &mut R) -> ParamId {
        let bound = if rows == 0 { 0.0 } else { 1.0 / math::sqrt(rows as f64) };
        let data = (0..rows * cols)
            .map(|_| if bound > 0.0 { rng.random_range(-bound..bound) } else { 0.0 })
            .collect();
        self.add(name, rows, cols, data)
    }

    pub fn add_zeros(&mut self, name: impl Into<String>, rows: usize, cols: usize) -> ParamId {
        self.add(name, rows, cols, vec![0.0; rows * cols])
    }

    pub fn get(&self, id: ParamId) -> &Param {
        &self.entries[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Param {
        &mut self.entries[id.0]
    }

    pub fn iter(&self) -> impl Iterator<Item = &Param> {
        self.entries.iter()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut Param> {
        self.entries.iter_mut()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Total number of scalar parameters.
    pub fn scalar_count(&self) -> usize {
        self.entries.iter().map(|p| p.data.len()).sum()
    }

    pub fn find(&self, name: &str) -> Option<ParamId> {
        self.entries.iter().position(|p| p.name == name).map(ParamId)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Shape {
    Pred { arity: usize, m: usize, channels: usize },
    Mat { rows: usize, cols: usize },
}

impl Shape {
    fn len(self) -> usize {
        match self {
            Shape::Pred { arity, m, channels } => cube_len(m, arity) * channels,
            Shape::Mat { rows, cols } => rows * cols,
        }
    }

    fn is_scalar(self) -> bool {
        self.len() == 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Identity,
    Sigmoid,
}

#[derive(Debug)]
enum Op {
    Leaf,
    PermuteAll { x: Var },
    Expand { x: Var },
    Reduce { x: Var, arg: Vec<u32> },
    Concat { xs: Vec<Var> },
    Dense { x: Var, w: Var, b: Var, act: Activation },
    Sigmoid { x: Var },
    Gather { x: Var, index: Vec<usize> },
    SoftmaxXent { logits: Var, labels: Vec<(usize, usize)>, probs: Vec<f64> },
    BceLogits { logits: Var, targets: Vec<(usize, f64)> },
    LogSoftmax { x: Var },
    Pick { x: Var, index: usize },
    Entropy { logp: Var },
    Sum { x: Var },
    Lin { terms: Vec<(Var, f64)> },
}

#[derive(Debug)]
struct Node {
    shape: Shape,
    value: Vec<f64>,
    op: Op,
    needs_grad: bool,
}

/// Binding of every parameter in a [`Params`] store to a leaf on a tape.
#[derive(Debug, Clone)]
pub struct Binding {
    vars: Vec<Var>,
}

impl Binding {
    pub fn var(&self, id: ParamId) -> Var {
        self.vars[id.0]
    }
}

/// A recorded computation.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
    macs: u64,
}

/// Adjoints produced by [`Tape::backward`].
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Vec<f64>>>,
}

impl Gradients {
    pub fn get(&self, v: Var) -> Option<&[f64]> {
        self.grads.get(v.0).and_then(|g| g.as_deref())
    }

    /// Gradients for every bound parameter, zero-filled when unused.
    pub fn for_params(&self, params: &Params, binding: &Binding) -> Vec<Vec<f64>> {
        params
            .iter()
            .zip(&binding.vars)
            .map(|(p, &v)| self.get(v).map(|g| g.to_vec()).unwrap_or_else(|| vec![0.0; p.data.len()]))
            .collect()
    }
}

/// Adds `src` into `dst` elementwise.
pub fn accumulate(dst: &mut [Vec<f64>], src: &[Vec<f64>]) {
    for (d, s) in dst.iter_mut().zip(src) {
        for (a, b) in d.iter_mut().zip(s) {
            *a += b;
        }
    }
}

/// Visits every valid entry (tuple, channel) of a shape as a data index.
fn for_valid_entries(shape: Shape, mut f: impl FnMut(usize)) {
    match shape {
        Shape::Pred { arity, m, channels } => {
            for flat in valid_tuples(m, arity) {
                for c in 0..channels {
                    f(flat * channels + c);
                }
            }
        }
        Shape::Mat { rows, cols } => (0..rows * cols).for_each(f),
    }
}

/// Softmax cross-entropy of one logit vector: the loss and its gradient.
pub fn softmax_cross_entropy(logits: &[f64], label: usize) -> Result<(f64, Vec<f64>), AutodiffError> {
    if logits.len() < 2 {
        return Err(AutodiffError::TooFewLogits(logits.len()));
    }
    if label >= logits.len() {
        return Err(AutodiffError::LabelOutOfRange { label, classes: logits.len() });
    }
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = logits.iter().map(|&l| math::exp(l - max)).sum();
    let lse = max + math::ln(sum);
    let mut grad: Vec<f64> = logits.iter().map(|&l| math::exp(l - lse)).collect();
    grad[label] -= 1.0;
    // -(l_label - lse), computed as a sum of positive softplus-like terms
    // for accuracy when the label dominates.
    let loss = if logits.len() == 2 {
        math::softplus(logits[1 - label] - logits[label])
    } else {
        lse - logits[label]
    };
    Ok((loss, grad))
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Multiply-accumulate operations performed by dense ops so far.
    pub fn mac_count(&self) -> u64 {
        self.macs
    }

    fn push(&mut self, shape: Shape, value: Vec<f64>, op: Op, needs_grad: bool) -> Var {
        debug_assert_eq!(shape.len(), value.len());
        self.nodes.push(Node { shape, value, op, needs_grad });
        Var(self.nodes.len() - 1)
    }

    fn needs(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    fn pred_shape(&self, v: Var, op: &'static str) -> Result<(usize, usize, usize), AutodiffError> {
        match self.nodes[v.0].shape {
            Shape::Pred { arity, m, channels } => Ok((arity, m, channels)),
            Shape::Mat { .. } => Err(AutodiffError::Shape { op, detail: "expected a predicate tensor".into() }),
        }
    }

    pub fn value(&self, v: Var) -> &[f64] {
        &self.nodes[v.0].value
    }

    /// Scalar value of a single-element node.
    pub fn scalar(&self, v: Var) -> f64 {
        self.nodes[v.0].value[0]
    }

    /// Copies a predicate-valued node out as a [`PredTensor`].
    pub fn pred(&self, v: Var) -> PredTensor {
        match self.nodes[v.0].shape {
            Shape::Pred { arity, m, channels } => {
                PredTensor::from_raw(arity, m, channels, self.nodes[v.0].value.clone()).expect("tape shapes are consistent")
            }
            Shape::Mat { .. } => panic!("node {} is not a predicate tensor", v.0),
        }
    }

    /// Records a constant predicate tensor (no gradient).
    pub fn constant(&mut self, t: &PredTensor) -> Var {
        let shape = Shape::Pred { arity: t.arity(), m: t.num_objects(), channels: t.channels() };
        self.push(shape, t.data().to_vec(), Op::Leaf, false)
    }

    /// Records a predicate tensor as a differentiable input.
    pub fn variable(&mut self, t: &PredTensor) -> Var {
        let shape = Shape::Pred { arity: t.arity(), m: t.num_objects(), channels: t.channels() };
        self.push(shape, t.data().to_vec(), Op::Leaf, true)
    }

    /// Records a differentiable matrix leaf.
    pub fn matrix(&mut self, rows: usize, cols: usize, data: Vec<f64>) -> Var {
        assert_eq!(rows * cols, data.len());
        self.push(Shape::Mat { rows, cols }, data, Op::Leaf, true)
    }

    /// Records every parameter as a differentiable leaf.
    pub fn bind(&mut self, params: &Params) -> Binding {
        let vars = params.iter().map(|p| self.matrix(p.rows, p.cols, p.data.clone())).collect();
        Binding { vars }
    }

    pub fn permute_all(&mut self, x: Var) -> Result<Var, AutodiffError> {
        let (arity, m, _) = self.pred_shape(x, "permute_all")?;
        if arity <= 1 {
            return Ok(x);
        }
        let out = tensor::permute_all(&self.pred(x));
        let shape = Shape::Pred { arity, m, channels: out.channels() };
        let ng = self.needs(x);
        Ok(self.push(shape, out.into_data(), Op::PermuteAll { x }, ng))
    }

    pub fn expand(&mut self, x: Var, breadth: usize) -> Result<Var, AutodiffError> {
        self.pred_shape(x, "expand")?;
        let out = tensor::expand(&self.pred(x), breadth)?;
        let shape = Shape::Pred { arity: out.arity(), m: out.num_objects(), channels: out.channels() };
        let ng = self.needs(x);
        Ok(self.push(shape, out.into_data(), Op::Expand { x }, ng))
    }

    pub fn reduce(&mut self, x: Var) -> Result<Var, AutodiffError> {
        let (arity, _, _) = self.pred_shape(x, "reduce")?;
        if arity == 0 {
            return Err(tensor::TensorError::ReduceNullary.into());
        }
        let (out, arg) = tensor::reduce_with_indices(&self.pred(x));
        let shape = Shape::Pred { arity: out.arity(), m: out.num_objects(), channels: out.channels() };
        let ng = self.needs(x);
        Ok(self.push(shape, out.into_data(), Op::Reduce { x, arg }, ng))
    }

    pub fn concat(&mut self, xs: &[Var]) -> Result<Var, AutodiffError> {
        if xs.is_empty() {
            return Err(tensor::TensorError::EmptyConcat.into());
        }
        if xs.len() == 1 {
            return Ok(xs[0]);
        }
        let (arity, m, _) = self.pred_shape(xs[0], "concat")?;
        let mut widths = Vec::with_capacity(xs.len());
        for &x in xs {
            let (a, mm, c) = self.pred_shape(x, "concat")?;
            if a != arity || mm != m {
                return Err(tensor::TensorError::ShapeMismatch(arity, m, a, mm).into());
            }
            widths.push(c);
        }
        let total: usize = widths.iter().sum();
        let n = cube_len(m, arity);
        let mut data = Vec::with_capacity(n * total);
        for flat in 0..n {
            for (&x, &c) in xs.iter().zip(&widths) {
                data.extend_from_slice(&self.nodes[x.0].value[flat * c..(flat + 1) * c]);
            }
        }
        let ng = xs.iter().any(|&x| self.needs(x));
        Ok(self.push(Shape::Pred { arity, m, channels: total }, data, Op::Concat { xs: xs.to_vec() }, ng))
    }

    /// Applies `act(x W + b)` at every valid tuple; `w` is `in x out`, `b` is `1 x out`.
    pub fn dense(&mut self, x: Var, w: Var, b: Var, act: Activation) -> Result<Var, AutodiffError> {
        let (arity, m, cin) = self.pred_shape(x, "dense")?;
        let (rows, cols) = match self.nodes[w.0].shape {
            Shape::Mat { rows, cols } => (rows, cols),
            _ => return Err(AutodiffError::Shape { op: "dense", detail: "weight must be a matrix".into() }),
        };
        if rows != cin || self.nodes[b.0].shape.len() != cols {
            return Err(AutodiffError::Shape {
                op: "dense",
                detail: alloc::format!("input width {cin}, weight {rows}x{cols}, bias {}", self.nodes[b.0].shape.len()),
            });
        }
        let xs = &self.nodes[x.0].value;
        let ws = &self.nodes[w.0].value;
        let bs = &self.nodes[b.0].value;
        let tuples = valid_tuples(m, arity);
        let mut out = vec![0.0; cube_len(m, arity) * cols];
        for &flat in &tuples {
            let z = &mut out[flat * cols..(flat + 1) * cols];
            z.copy_from_slice(bs);
            let xrow = &xs[flat * cin..(flat + 1) * cin];
            for (k, &xv) in xrow.iter().enumerate() {
                if xv != 0.0 {
                    let wrow = &ws[k * cols..(k + 1) * cols];
                    for (zo, &wv) in z.iter_mut().zip(wrow) {
                        *zo += xv * wv;
                    }
                }
            }
            if act == Activation::Sigmoid {
                for zo in z.iter_mut() {
                    *zo = math::sigmoid(*zo);
                }
            }
        }
        self.macs += (tuples.len() * cin * cols) as u64;
        let ng = self.needs(x) || self.needs(w) || self.needs(b);
        Ok(self.push(Shape::Pred { arity, m, channels: cols }, out, Op::Dense { x, w, b, act }, ng))
    }

    /// Elementwise sigmoid (valid entries only for predicate tensors).
    pub fn sigmoid(&mut self, x: Var) -> Var {
        let shape = self.nodes[x.0].shape;
        let mut out = vec![0.0; shape.len()];
        let xs = &self.nodes[x.0].value;
        for_valid_entries(shape, |i| out[i] = math::sigmoid(xs[i]));
        let ng = self.needs(x);
        self.push(shape, out, Op::Sigmoid { x }, ng)
    }

    /// Builds a unary tensor whose object `k` is object `index[k]` of `x`.
    pub fn gather_objects(&mut self, x: Var, index: &[usize]) -> Result<Var, AutodiffError> {
        let (arity, m, c) = self.pred_shape(x, "gather_objects")?;
        if arity != 1 || index.iter().any(|&i| i >= m) || index.is_empty() {
            return Err(AutodiffError::Shape { op: "gather_objects", detail: "needs a unary tensor and in-range indices".into() });
        }
        let xs = &self.nodes[x.0].value;
        let mut out = Vec::with_capacity(index.len() * c);
        for &i in index {
            out.extend_from_slice(&xs[i * c..(i + 1) * c]);
        }
        let ng = self.needs(x);
        Ok(self.push(
            Shape::Pred { arity: 1, m: index.len(), channels: c },
            out,
            Op::Gather { x, index: index.to_vec() },
            ng,
        ))
    }

    /// Summed softmax cross-entropy over the listed tuples; `labels` pairs a
    /// tuple flat index with its class (a channel of `logits`).
    pub fn softmax_xent(&mut self, logits: Var, labels: &[(usize, usize)]) -> Result<Var, AutodiffError> {
        let (_, _, c) = self.pred_shape(logits, "softmax_xent")?;
        let xs = &self.nodes[logits.0].value;
        let mut probs = Vec::with_capacity(labels.len() * c);
        let mut total = 0.0;
        for &(flat, label) in labels {
            let (loss, grad) = softmax_cross_entropy(&xs[flat * c..(flat + 1) * c], label)?;
            total += loss;
            for (k, g) in grad.into_iter().enumerate() {
                probs.push(if k == label { g + 1.0 } else { g });
            }
        }
        let ng = self.needs(logits);
        Ok(self.push(
            Shape::Mat { rows: 1, cols: 1 },
            vec![total],
            Op::SoftmaxXent { logits, labels: labels.to_vec(), probs },
            ng,
        ))
    }

    /// Summed binary cross-entropy with logits over `(data index, target)` pairs.
    pub fn bce_with_logits(&mut self, logits: Var, targets: &[(usize, f64)]) -> Var {
        let xs = &self.nodes[logits.0].value;
        let total: f64 = targets
            .iter()
            .map(|&(i, y)| {
                let z = xs[i];
                y * math::softplus(-z) + (1.0 - y) * math::softplus(z)
            })
            .sum();
        let ng = self.needs(logits);
        self.push(Shape::Mat { rows: 1, cols: 1 }, vec![total], Op::BceLogits { logits, targets: targets.to_vec() }, ng)
    }

    /// Log-softmax across all valid entries of a predicate tensor.
    pub fn log_softmax(&mut self, x: Var) -> Var {
        let shape = self.nodes[x.0].shape;
        let xs = &self.nodes[x.0].value;
        let mut max = f64::NEG_INFINITY;
        for_valid_entries(shape, |i| max = max.max(xs[i]));
        let mut sum = 0.0;
        for_valid_entries(shape, |i| sum += math::exp(xs[i] - max));
        let lse = max + math::ln(sum);
        let mut out = vec![0.0; shape.len()];
        for_valid_entries(shape, |i| out[i] = xs[i] - lse);
        let ng = self.needs(x);
        self.push(shape, out, Op::LogSoftmax { x }, ng)
    }

    /// The scalar at data index `index` of `x`.
    pub fn pick(&mut self, x: Var, index: usize) -> Var {
        let v = self.nodes[x.0].value[index];
        let ng = self.needs(x);
        self.push(Shape::Mat { rows: 1, cols: 1 }, vec![v], Op::Pick { x, index }, ng)
    }

    /// Entropy `-sum p log p` of a log-probability tensor.
    pub fn entropy(&mut self, logp: Var) -> Var {
        let shape = self.nodes[logp.0].shape;
        let ls = &self.nodes[logp.0].value;
        let mut h = 0.0;
        for_valid_entries(shape, |i| {
            let p = math::exp(ls[i]);
            if p > 0.0 {
                h -= p * ls[i];
            }
        });
        let ng = self.needs(logp);
        self.push(Shape::Mat { rows: 1, cols: 1 }, vec![h], Op::Entropy { logp }, ng)
    }

    /// Sum over valid entries.
    pub fn sum(&mut self, x: Var) -> Var {
        let shape = self.nodes[x.0].shape;
        let xs = &self.nodes[x.0].value;
        let mut s = 0.0;
        for_valid_entries(shape, |i| s += xs[i]);
        let ng = self.needs(x);
        self.push(Shape::Mat { rows: 1, cols: 1 }, vec![s], Op::Sum { x }, ng)
    }

    /// `sum_i c_i x_i` over same-shaped nodes.
    pub fn lin(&mut self, terms: &[(Var, f64)]) -> Result<Var, AutodiffError> {
        let first = terms.first().ok_or(AutodiffError::Shape { op: "lin", detail: "no terms".into() })?;
        let shape = self.nodes[first.0 .0].shape;
        if terms.iter().any(|(v, _)| self.nodes[v.0].shape != shape) {
            return Err(AutodiffError::Shape { op: "lin", detail: "terms differ in shape".into() });
        }
        let mut out = vec![0.0; shape.len()];
        for &(v, c) in terms {
            for (o, &x) in out.iter_mut().zip(&self.nodes[v.0].value) {
                *o += c * x;
            }
        }
        let ng = terms.iter().any(|&(v, _)| self.needs(v));
        Ok(self.push(shape, out, Op::Lin { terms: terms.to_vec() }, ng))
    }

    /// Propagates adjoints from a scalar node back to every node that needs them.
    pub fn backward(&self, loss: Var) -> Result<Gradients, AutodiffError> {
        if !self.nodes[loss.0].shape.is_scalar() {
            return Err(AutodiffError::NotScalar);
        }
        let mut grads: Vec<Option<Vec<f64>>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(vec![1.0]);
        for id in (0..=loss.0).rev() {
            let node = &self.nodes[id];
            if !node.needs_grad {
                continue;
            }
            let Some(g) = grads[id].take() else { continue };
            self.propagate(node, &g, &mut grads);
            grads[id] = Some(g);
        }
        Ok(Gradients { grads })
    }

    fn propagate(&self, node: &Node, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
        match &node.op {
            Op::Leaf => {}
            Op::PermuteAll { x } => {
                if !self.needs(*x) {
                    return;
                }
                let Shape::Pred { arity, m, channels } = self.nodes[x.0].shape else { unreachable!() };
                let sources = tensor::permutation_sources(m, arity);
                let out_c = sources.len() * channels;
                let dx = grads_mut(grads, *x, self);
                for flat in valid_tuples(m, arity) {
                    for (p, src) in sources.iter().enumerate() {
                        let s = src[flat];
                        for c in 0..channels {
                            dx[s * channels + c] += g[flat * out_c + p * channels + c];
                        }
                    }
                }
            }
            Op::Expand { x } => {
                if !self.needs(*x) {
                    return;
                }
                let Shape::Pred { arity, m, channels } = node.shape else { unreachable!() };
                let dx = grads_mut(grads, *x, self);
                for flat in valid_tuples(m, arity) {
                    let s = flat / m;
                    for c in 0..channels {
                        dx[s * channels + c] += g[flat * channels + c];
                    }
                }
            }
            Op::Reduce { x, arg } => {
                if !self.needs(*x) {
                    return;
                }
                let dx = grads_mut(grads, *x, self);
                for (j, &a) in arg.iter().enumerate() {
                    if a != NO_SOURCE {
                        dx[a as usize] += g[j];
                    }
                }
            }
            Op::Concat { xs } => {
                let Shape::Pred { arity, m, channels: total } = node.shape else { unreachable!() };
                let n = cube_len(m, arity);
                let mut offset = 0;
                for &x in xs {
                    let Shape::Pred { channels: c, .. } = self.nodes[x.0].shape else { unreachable!() };
                    if self.needs(x) {
                        let dx = grads_mut(grads, x, self);
                        for flat in 0..n {
                            for k in 0..c {
                                dx[flat * c + k] += g[flat * total + offset + k];
                            }
                        }
                    }
                    offset += c;
                }
            }
            Op::Dense { x, w, b, act } => {
                let Shape::Pred { arity, m, channels: cin } = self.nodes[x.0].shape else { unreachable!() };
                let Shape::Mat { cols, .. } = self.nodes[w.0].shape else { unreachable!() };
                let xs = &self.nodes[x.0].value;
                let ws = &self.nodes[w.0].value;
                let ys = &node.value;
                let tuples = valid_tuples(m, arity);
                // Pre-activation adjoints.
                let mut dz = vec![0.0; cols];
                let take = |grads: &mut [Option<Vec<f64>>], v: Var| {
                    grads[v.0].take().unwrap_or_else(|| vec![0.0; self.nodes[v.0].value.len()])
                };
                let mut dw = take(grads, *w);
                let mut db = take(grads, *b);
                let mut dx = if self.needs(*x) { Some(take(grads, *x)) } else { None };
                for &flat in &tuples {
                    for o in 0..cols {
                        let go = g[flat * cols + o];
                        dz[o] = match act {
                            Activation::Identity => go,
                            Activation::Sigmoid => {
                                let y = ys[flat * cols + o];
                                go * y * (1.0 - y)
                            }
                        };
                    }
                    if dz.iter().all(|&d| d == 0.0) {
                        continue;
                    }
                    for (o, &d) in dz.iter().enumerate() {
                        db[o] += d;
                    }
                    let xrow = &xs[flat * cin..(flat + 1) * cin];
                    for (k, &xv) in xrow.iter().enumerate() {
                        let wrow = &ws[k * cols..(k + 1) * cols];
                        if xv != 0.0 {
                            let dwrow = &mut dw[k * cols..(k + 1) * cols];
                            for (dwo, &d) in dwrow.iter_mut().zip(&dz) {
                                *dwo += xv * d;
                            }
                        }
                        if let Some(dx) = dx.as_mut() {
                            let mut s = 0.0;
                            for (&wv, &d) in wrow.iter().zip(&dz) {
                                s += wv * d;
                            }
                            dx[flat * cin + k] += s;
                        }
                    }
                }
                grads[w.0] = Some(dw);
                grads[b.0] = Some(db);
                if let Some(dx) = dx {
                    grads[x.0] = Some(dx);
                }
            }
            Op::Sigmoid { x } => {
                let dx = grads_mut(grads, *x, self);
                for_valid_entries(node.shape, |i| {
                    let y = node.value[i];
                    dx[i] += g[i] * y * (1.0 - y);
                });
            }
            Op::Gather { x, index } => {
                let Shape::Pred { channels: c, .. } = node.shape else { unreachable!() };
                let dx = grads_mut(grads, *x, self);
                for (k, &i) in index.iter().enumerate() {
                    for ch in 0..c {
                        dx[i * c + ch] += g[k * c + ch];
                    }
                }
            }
            Op::SoftmaxXent { logits, labels, probs } => {
                let Shape::Pred { channels: c, .. } = self.nodes[logits.0].shape else { unreachable!() };
                let dx = grads_mut(grads, *logits, self);
                for (n, &(flat, label)) in labels.iter().enumerate() {
                    for k in 0..c {
                        let onehot = if k == label { 1.0 } else { 0.0 };
                        dx[flat * c + k] += g[0] * (probs[n * c + k] - onehot);
                    }
                }
            }
            Op::BceLogits { logits, targets } => {
                let zs = &self.nodes[logits.0].value;
                let dx = grads_mut(grads, *logits, self);
                for &(i, y) in targets {
                    dx[i] += g[0] * (math::sigmoid(zs[i]) - y);
                }
            }
            Op::LogSoftmax { x } => {
                let mut gsum = 0.0;
                for_valid_entries(node.shape, |i| gsum += g[i]);
                let dx = grads_mut(grads, *x, self);
                for_valid_entries(node.shape, |i| dx[i] += g[i] - math::exp(node.value[i]) * gsum);
            }
            Op::Pick { x, index } => {
                let dx = grads_mut(grads, *x, self);
                dx[*index] += g[0];
            }
            Op::Entropy { logp } => {
                let shape = self.nodes[logp.0].shape;
                let ls = &self.nodes[logp.0].value;
                let dx = grads_mut(grads, *logp, self);
                for_valid_entries(shape, |i| {
                    let p = math::exp(ls[i]);
                    dx[i] -= g[0] * p * (ls[i] + 1.0);
                });
            }
            Op::Sum { x } => {
                let shape = self.nodes[x.0].shape;
                let dx = grads_mut(grads, *x, self);
                for_valid_entries(shape, |i| dx[i] += g[0]);
            }
            Op::Lin { terms } => {
                for &(v, c) in terms {
                    if self.needs(v) {
                        let dv = grads_mut(grads, v, self);
                        for (d, &gi) in dv.iter_mut().zip(g) {
                            *d += c * gi;
                        }
                    }
                }
            }
        }
    }
}

fn grads_mut<'a>(grads: &'a mut [Option<Vec<f64>>], v: Var, tape: &Tape) -> &'a mut Vec<f64> {
    let len = tape.nodes[v.0].value.len();
    grads[v.0].get_or_insert_with(|| vec![0.0; len])
}
