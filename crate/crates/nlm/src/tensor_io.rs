//! Versioned JSON record of a predicate tensor.

use nlm_core::tensor::{cube_len, PredTensor};
use serde::{Deserialize, Serialize};

pub const TENSOR_VERSION: u32 = 1;

/// `{version, r, m, C, values}` with row-major values over the full cube;
/// entries at tuples with repeated objects are stored as 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TensorRecord {
    pub version: u32,
    pub r: usize,
    pub m: usize,
    #[serde(rename = "C")]
    pub c: usize,
    pub values: Vec<f64>,
}

impl From<&PredTensor> for TensorRecord {
    fn from(t: &PredTensor) -> Self {
        Self { version: TENSOR_VERSION, r: t.arity(), m: t.num_objects(), c: t.channels(), values: t.data().to_vec() }
    }
}

impl TensorRecord {
    pub fn to_tensor(&self) -> Result<PredTensor, String> {
        if self.version != TENSOR_VERSION {
            return Err(format!("unsupported tensor record version {}", self.version));
        }
        if self.values.len() != cube_len(self.m, self.r) * self.c {
            return Err(format!("tensor record has {} values, expected m^r*C", self.values.len()));
        }
        let t = PredTensor::from_raw(self.r, self.m, self.c, self.values.clone()).map_err(|e| e.to_string())?;
        if t.data() != self.values.as_slice() {
            return Err("tensor record has non-zero entries at repeated-object tuples".into());
        }
        Ok(t)
    }
}
