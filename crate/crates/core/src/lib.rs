//! Neural Logic Machines without the standard library.
//!
//! The crate holds every piece of the machine that is pure computation:
//!
//! - [`tensor`]: predicate groups grounded on a finite object set and the
//!   lifted `Permute` / `Expand` / `Reduce` operators.
//! - [`autodiff`]: a reverse-mode tape over those operators plus the neural
//!   primitives, and the Adam optimizer.
//! - [`model`]: the multi-layer, multi-group machine and its output heads.
//! - [`logic`]: an exact Horn-clause engine used for labels and verification.
//! - [`tasks`]: generators, encoders and environments for the benchmark tasks.
//! - [`train`]: supervised and policy-gradient training with curriculum.
//!
//! File formats, configuration parsing and the command line live in the
//! `nlm` companion crate.
#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod autodiff;
pub mod logic;
pub(crate) mod math;
pub mod model;
pub mod rng;
pub mod tasks;
pub mod tensor;
pub mod train;
pub mod verify;

pub use autodiff::{Adam, AdamConfig, Gradients, ParamId, Params, Tape, Var};
pub use model::{Model, NlmConfig};
pub use tensor::{AxisPermutation, PredTensor, TensorError};
