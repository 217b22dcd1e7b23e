use super::{Activation, AutodiffError, Binding, ParamId, Params, Tape, Var};
use crate::tensor::PredTensor;
use alloc::format;
use alloc::vec::Vec;
use rand::Rng;

/// A pointwise perceptron: zero or one sigmoid hidden layer, sigmoid output.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MlpParams {
    /// `(weight, bias)` per affine layer, input side first.
    pub layers: Vec<(ParamId, ParamId)>,
    pub input: usize,
    pub output: usize,
}

impl MlpParams {
    pub fn new<R: Rng + ?Sized>(
        params: &mut Params,
        prefix: &str,
        input: usize,
        hidden: Option<usize>,
        output: usize,
        rng: &mut R,
    ) -> Self {
        let mut widths = Vec::with_capacity(3);
        widths.push(input);
        if let Some(h) = hidden {
            widths.push(h);
        }
        widths.push(output);
        let layers = widths
            .windows(2)
            .enumerate()
            .map(|(k, w)| {
                let weight = params.add_uniform(format!("{prefix}.l{k}.w"), w[0], w[1], rng);
                let bias = params.add_zeros(format!("{prefix}.l{k}.b"), 1, w[1]);
                (weight, bias)
            })
            .collect();
        Self { layers, input, output }
    }

    pub fn hidden_layers(&self) -> usize {
        self.layers.len() - 1
    }

    /// Records the MLP on a tape, applied independently at every valid tuple.
    pub fn forward(&self, tape: &mut Tape, binding: &Binding, x: Var) -> Result<Var, AutodiffError> {
        let mut h = x;
        for &(w, b) in &self.layers {
            h = tape.dense(h, binding.var(w), binding.var(b), Activation::Sigmoid)?;
        }
        Ok(h)
    }
}

/// Evaluates an MLP on a predicate tensor outside of training.
pub fn mlp_forward(params: &Params, mlp: &MlpParams, x: &PredTensor) -> Result<PredTensor, AutodiffError> {
    if x.channels() != mlp.input {
        return Err(AutodiffError::Shape {
            op: "mlp_forward",
            detail: format!("input has {} channels, MLP expects {}", x.channels(), mlp.input),
        });
    }
    let mut tape = Tape::new();
    let binding = tape.bind(params);
    let xv = tape.constant(x);
    let out = mlp.forward(&mut tape, &binding, xv)?;
    Ok(tape.pred(out))
}
