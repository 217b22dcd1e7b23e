//! Predicate groups as dense tensors and the three lifted operators.
//!
//! A [`PredTensor`] stores the grounding of `C` predicates of arity `r` over
//! `m` objects as a full `m^r` cube per channel, channel axis last, row-major.
//! Only tuples whose object indices are pairwise distinct are meaningful;
//! every other entry is stored as `0.0` and never read by an operator.

use alloc::vec;
use alloc::vec::Vec;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TensorError {
    #[error("value buffer has length {got}, expected {expected}")]
    Length { expected: usize, got: usize },
    #[error("entry {index} = {value} lies outside [0, 1]")]
    OutOfRange { index: usize, value: f64 },
    #[error("cannot expand arity {arity} beyond breadth {breadth}")]
    BreadthOverflow { arity: usize, breadth: usize },
    #[error("cannot expand arity {arity} over {m} objects: no distinct fresh object")]
    NoFreshObject { arity: usize, m: usize },
    #[error("cannot reduce a nullary tensor")]
    ReduceNullary,
    #[error("concatenation needs at least one tensor")]
    EmptyConcat,
    #[error("shape mismatch: arity {0} over {1} objects vs arity {2} over {3} objects")]
    ShapeMismatch(usize, usize, usize, usize),
    #[error("relabeling has length {got}, expected a permutation of {m} objects")]
    BadRelabeling { m: usize, got: usize },
    #[error("need at least one object")]
    NoObjects,
}

/// Number of index tuples of arity `r` over `m` objects, valid or not.
#[inline]
pub fn cube_len(m: usize, r: usize) -> usize {
    m.pow(r as u32)
}

/// Falling factorial `m (m-1) ... (m-r+1)`: the number of valid tuples.
pub fn falling(m: usize, r: usize) -> usize {
    (0..r).map(|i| m.saturating_sub(i)).product()
}

pub fn factorial(r: usize) -> usize {
    (1..=r).product()
}

/// Decodes a flat tuple index into its object indices.
pub fn unflatten(mut flat: usize, m: usize, r: usize, out: &mut [usize]) {
    for k in (0..r).rev() {
        out[k] = flat % m;
        flat /= m;
    }
}

pub fn flatten(idx: &[usize], m: usize) -> usize {
    idx.iter().fold(0, |acc, &i| acc * m + i)
}

/// True when all entries of `idx` are pairwise distinct.
pub fn all_distinct(idx: &[usize]) -> bool {
    for i in 0..idx.len() {
        for j in (i + 1)..idx.len() {
            if idx[i] == idx[j] {
                return false;
            }
        }
    }
    true
}

/// Flat indices of all valid (pairwise distinct) tuples, ascending.
pub fn valid_tuples(m: usize, r: usize) -> Vec<usize> {
    let mut idx = vec![0usize; r];
    let mut out = Vec::with_capacity(falling(m, r));
    for flat in 0..cube_len(m, r) {
        unflatten(flat, m, r, &mut idx);
        if all_distinct(&idx) {
            out.push(flat);
        }
    }
    out
}

/// An ordering of the object axes of an arity-`r` tensor.
///
/// Applying permutation `p` to tensor `t` yields `t'(x_1..x_r) =
/// t(x_{p[0]}, .., x_{p[r-1]})` (zero-based positions).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct AxisPermutation(Vec<usize>);

impl AxisPermutation {
    pub fn identity(r: usize) -> Self {
        Self((0..r).collect())
    }

    /// Builds a permutation from zero-based positions; `None` unless bijective.
    pub fn new(order: Vec<usize>) -> Option<Self> {
        let mut seen = vec![false; order.len()];
        for &p in &order {
            if p >= order.len() || seen[p] {
                return None;
            }
            seen[p] = true;
        }
        Some(Self(order))
    }

    /// All `r!` permutations in lexicographic order, identity first.
    pub fn all(r: usize) -> Vec<Self> {
        let mut cur: Vec<usize> = (0..r).collect();
        let mut out = vec![Self(cur.clone())];
        // Standard next-permutation walk.
        loop {
            let Some(i) = (1..r).rev().find(|&i| cur[i - 1] < cur[i]) else {
                return out;
            };
            let j = (i..r).rev().find(|&j| cur[j] > cur[i - 1]).unwrap();
            cur.swap(i - 1, j);
            cur[i..].reverse();
            out.push(Self(cur.clone()));
        }
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn arity(&self) -> usize {
        self.0.len()
    }

    pub fn inverse(&self) -> Self {
        let mut inv = vec![0; self.0.len()];
        for (k, &p) in self.0.iter().enumerate() {
            inv[p] = k;
        }
        Self(inv)
    }

    pub fn is_identity(&self) -> bool {
        self.0.iter().enumerate().all(|(k, &p)| k == p)
    }
}

/// For every permutation (in [`AxisPermutation::all`] order) and every tuple
/// flat index of the output, the flat index of the source tuple.
pub fn permutation_sources(m: usize, r: usize) -> Vec<Vec<usize>> {
    let perms = AxisPermutation::all(r);
    let n = cube_len(m, r);
    let mut idx = vec![0usize; r];
    let mut src = vec![0usize; r];
    perms
        .iter()
        .map(|p| {
            (0..n)
                .map(|flat| {
                    unflatten(flat, m, r, &mut idx);
                    for (k, &pk) in p.as_slice().iter().enumerate() {
                        src[k] = idx[pk];
                    }
                    flatten(&src, m)
                })
                .collect()
        })
        .collect()
}

/// The U-grounding of a group of same-arity predicates.
#[derive(Debug, Clone, PartialEq)]
pub struct PredTensor {
    arity: usize,
    m: usize,
    channels: usize,
    data: Vec<f64>,
}

impl PredTensor {
    pub fn zeros(arity: usize, m: usize, channels: usize) -> Self {
        Self {
            arity,
            m,
            channels,
            data: vec![0.0; cube_len(m, arity) * channels],
        }
    }

    /// Builds a tensor from row-major values, checking length and range.
    /// Entries at invalid tuples are reset to zero.
    pub fn new(arity: usize, m: usize, channels: usize, data: Vec<f64>) -> Result<Self, TensorError> {
        let t = Self::from_raw(arity, m, channels, data)?;
        if let Some((index, &value)) = t
            .data
            .iter()
            .enumerate()
            .find(|(_, v)| !(0.0..=1.0).contains(*v))
        {
            return Err(TensorError::OutOfRange { index, value });
        }
        Ok(t)
    }

    /// Like [`PredTensor::new`] but without the `[0, 1]` range check; used for
    /// logits and scores that share the layout.
    pub fn from_raw(arity: usize, m: usize, channels: usize, mut data: Vec<f64>) -> Result<Self, TensorError> {
        if m == 0 {
            return Err(TensorError::NoObjects);
        }
        let expected = cube_len(m, arity) * channels;
        if data.len() != expected {
            return Err(TensorError::Length { expected, got: data.len() });
        }
        if arity >= 2 && channels > 0 {
            let mut idx = vec![0usize; arity];
            for flat in 0..cube_len(m, arity) {
                unflatten(flat, m, arity, &mut idx);
                if !all_distinct(&idx) {
                    data[flat * channels..(flat + 1) * channels].fill(0.0);
                }
            }
        }
        Ok(Self { arity, m, channels, data })
    }

    /// Fills every valid tuple and channel from `f(tuple, channel)`.
    pub fn from_fn(arity: usize, m: usize, channels: usize, mut f: impl FnMut(&[usize], usize) -> f64) -> Self {
        let mut t = Self::zeros(arity, m, channels);
        let mut idx = vec![0usize; arity];
        for flat in 0..cube_len(m, arity) {
            unflatten(flat, m, arity, &mut idx);
            if all_distinct(&idx) {
                for c in 0..channels {
                    t.data[flat * channels + c] = f(&idx, c);
                }
            }
        }
        t
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn num_objects(&self) -> usize {
        self.m
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn get(&self, idx: &[usize], channel: usize) -> f64 {
        debug_assert_eq!(idx.len(), self.arity);
        self.data[flatten(idx, self.m) * self.channels + channel]
    }

    /// Writes a value at a tuple; writes to invalid tuples are ignored.
    pub fn set(&mut self, idx: &[usize], channel: usize, value: f64) {
        if all_distinct(idx) {
            self.data[flatten(idx, self.m) * self.channels + channel] = value;
        }
    }

    pub fn is_valid(&self, idx: &[usize]) -> bool {
        idx.len() == self.arity && idx.iter().all(|&i| i < self.m) && all_distinct(idx)
    }

    /// Extracts a subset of channels, in the given order.
    pub fn select_channels(&self, channels: &[usize]) -> Self {
        let mut data = Vec::with_capacity(cube_len(self.m, self.arity) * channels.len());
        for flat in 0..cube_len(self.m, self.arity) {
            for &c in channels {
                data.push(self.data[flat * self.channels + c]);
            }
        }
        Self { arity: self.arity, m: self.m, channels: channels.len(), data }
    }

    /// Transposes object axes: `out(x) = self(x_{p[0]}, .., x_{p[r-1]})`.
    pub fn transpose(&self, p: &AxisPermutation) -> Self {
        assert_eq!(p.arity(), self.arity);
        let mut out = Self::zeros(self.arity, self.m, self.channels);
        let mut idx = vec![0usize; self.arity];
        let mut src = vec![0usize; self.arity];
        for flat in 0..cube_len(self.m, self.arity) {
            unflatten(flat, self.m, self.arity, &mut idx);
            for (k, &pk) in p.as_slice().iter().enumerate() {
                src[k] = idx[pk];
            }
            let s = flatten(&src, self.m);
            out.data[flat * self.channels..(flat + 1) * self.channels]
                .copy_from_slice(&self.data[s * self.channels..(s + 1) * self.channels]);
        }
        out
    }

    /// Renames objects: object `i` becomes object `pi[i]` on every axis.
    pub fn relabel(&self, pi: &[usize]) -> Result<Self, TensorError> {
        if pi.len() != self.m || AxisPermutation::new(pi.to_vec()).is_none() {
            return Err(TensorError::BadRelabeling { m: self.m, got: pi.len() });
        }
        let mut out = Self::zeros(self.arity, self.m, self.channels);
        let mut idx = vec![0usize; self.arity];
        let mut dst = vec![0usize; self.arity];
        for flat in 0..cube_len(self.m, self.arity) {
            unflatten(flat, self.m, self.arity, &mut idx);
            for k in 0..self.arity {
                dst[k] = pi[idx[k]];
            }
            let d = flatten(&dst, self.m);
            out.data[d * self.channels..(d + 1) * self.channels]
                .copy_from_slice(&self.data[flat * self.channels..(flat + 1) * self.channels]);
        }
        Ok(out)
    }
}

/// Stacks all `r!` axis permutations of every channel.
///
/// Output channel `p * C + c` holds channel `c` under permutation `p`, with
/// permutations in [`AxisPermutation::all`] order, so the first `C` channels
/// are the input unchanged.
pub fn permute_all(t: &PredTensor) -> PredTensor {
    if t.arity <= 1 {
        return t.clone();
    }
    let sources = permutation_sources(t.m, t.arity);
    let c = t.channels;
    let out_c = sources.len() * c;
    let n = cube_len(t.m, t.arity);
    let mut data = vec![0.0; n * out_c];
    for flat in valid_tuples(t.m, t.arity) {
        for (p, src) in sources.iter().enumerate() {
            let s = src[flat];
            data[flat * out_c + p * c..flat * out_c + (p + 1) * c]
                .copy_from_slice(&t.data[s * c..(s + 1) * c]);
        }
    }
    PredTensor { arity: t.arity, m: t.m, channels: out_c, data }
}

/// Introduces a fresh trailing variable: `out(x_1..x_r, y) = t(x_1..x_r)`.
pub fn expand(t: &PredTensor, breadth: usize) -> Result<PredTensor, TensorError> {
    if t.arity >= breadth {
        return Err(TensorError::BreadthOverflow { arity: t.arity, breadth });
    }
    if t.m <= t.arity {
        return Err(TensorError::NoFreshObject { arity: t.arity, m: t.m });
    }
    Ok(expand_unchecked(t))
}

pub(crate) fn expand_unchecked(t: &PredTensor) -> PredTensor {
    let r = t.arity + 1;
    let c = t.channels;
    let m = t.m;
    let mut data = vec![0.0; cube_len(m, r) * c];
    for flat in valid_tuples(m, r) {
        let s = flat / m;
        data[flat * c..(flat + 1) * c].copy_from_slice(&t.data[s * c..(s + 1) * c]);
    }
    PredTensor { arity: r, m, channels: c, data }
}

/// Quantifies out the last variable. Output channels are `[∃ block, ∀ block]`.
pub fn reduce(t: &PredTensor) -> Result<PredTensor, TensorError> {
    if t.arity == 0 {
        return Err(TensorError::ReduceNullary);
    }
    Ok(reduce_with_indices(t).0)
}

/// No source element (empty quantification domain).
pub(crate) const NO_SOURCE: u32 = u32::MAX;

/// Reduction plus, for every output entry, the flat data index of the input
/// element that attained the extremum (first in index order on ties).
pub(crate) fn reduce_with_indices(t: &PredTensor) -> (PredTensor, Vec<u32>) {
    let r = t.arity - 1;
    let m = t.m;
    let c = t.channels;
    let out_c = 2 * c;
    let n_out = cube_len(m, r);
    let mut data = vec![0.0; n_out * out_c];
    let mut arg = vec![NO_SOURCE; n_out * out_c];
    let mut idx = vec![0usize; r];
    for flat in valid_tuples(m, r) {
        unflatten(flat, m, r, &mut idx);
        let base = flat * out_c;
        for ch in 0..c {
            let mut best_max = f64::NEG_INFINITY;
            let mut best_min = f64::INFINITY;
            let mut arg_max = NO_SOURCE;
            let mut arg_min = NO_SOURCE;
            for y in 0..m {
                if idx.contains(&y) {
                    continue;
                }
                let src = (flat * m + y) * c + ch;
                let v = t.data[src];
                if v > best_max {
                    best_max = v;
                    arg_max = src as u32;
                }
                if v < best_min {
                    best_min = v;
                    arg_min = src as u32;
                }
            }
            if arg_max == NO_SOURCE {
                // Empty domain: neutral elements of max and min.
                best_max = 0.0;
                best_min = 1.0;
            }
            data[base + ch] = best_max;
            data[base + c + ch] = best_min;
            arg[base + ch] = arg_max;
            arg[base + c + ch] = arg_min;
        }
    }
    (PredTensor { arity: r, m, channels: out_c, data }, arg)
}

/// Concatenates along the channel axis, first input first.
pub fn concat_channels(ts: &[&PredTensor]) -> Result<PredTensor, TensorError> {
    let first = ts.first().ok_or(TensorError::EmptyConcat)?;
    for t in ts {
        if t.arity != first.arity || t.m != first.m {
            return Err(TensorError::ShapeMismatch(first.arity, first.m, t.arity, t.m));
        }
    }
    let total: usize = ts.iter().map(|t| t.channels).sum();
    let n = cube_len(first.m, first.arity);
    let mut data = Vec::with_capacity(n * total);
    for flat in 0..n {
        for t in ts {
            data.extend_from_slice(&t.data[flat * t.channels..(flat + 1) * t.channels]);
        }
    }
    Ok(PredTensor { arity: first.arity, m: first.m, channels: total, data })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn binary_pair() -> PredTensor {
        // m = 2: p(a,b) = 0.2, p(b,a) = 0.8.
        PredTensor::new(2, 2, 1, vec![0.0, 0.2, 0.8, 0.0]).unwrap()
    }

    #[test]
    fn permutation_enumeration_is_lexicographic() {
        let all = AxisPermutation::all(3);
        let got: Vec<Vec<usize>> = all.iter().map(|p| p.as_slice().to_vec()).collect();
        assert_eq!(
            got,
            vec![
                vec![0, 1, 2],
                vec![0, 2, 1],
                vec![1, 0, 2],
                vec![1, 2, 0],
                vec![2, 0, 1],
                vec![2, 1, 0]
            ]
        );
        assert_eq!(AxisPermutation::all(0).len(), 1);
        assert!(AxisPermutation::all(4)[0].is_identity());
        assert_eq!(AxisPermutation::all(4).len(), 24);
    }

    #[test]
    fn permute_binary() {
        let out = permute_all(&binary_pair());
        assert_eq!(out.channels(), 2);
        assert_eq!(out.get(&[0, 1], 0), 0.2);
        assert_eq!(out.get(&[0, 1], 1), 0.8);
        assert_eq!(out.get(&[1, 0], 0), 0.8);
        assert_eq!(out.get(&[1, 0], 1), 0.2);
    }

    #[test]
    fn permute_unary_is_identity() {
        let t = PredTensor::new(1, 3, 2, vec![0.1, 0.2, 0.3, 0.4, 0.5, 0.6]).unwrap();
        assert_eq!(permute_all(&t), t);
    }

    #[test]
    fn permute_ternary_channel_for_swap_of_first_two() {
        let t = PredTensor::from_fn(3, 3, 1, |i, _| (i[0] * 9 + i[1] * 3 + i[2]) as f64 / 27.0);
        let out = permute_all(&t);
        assert_eq!(out.channels(), 6);
        // (2,1,3) in one-based notation is [1,0,2], index 2 in lexicographic order.
        let p = AxisPermutation::all(3).iter().position(|p| p.as_slice() == [1, 0, 2]).unwrap();
        let (a, b, c) = (0, 1, 2);
        assert_eq!(out.get(&[a, b, c], p), t.get(&[b, a, c], 0));
    }

    #[test]
    fn expand_copies() {
        let p = PredTensor::new(1, 3, 1, vec![0.1, 0.5, 0.9]).unwrap();
        let q = expand(&p, 3).unwrap();
        assert_eq!(q.arity(), 2);
        assert_eq!(q.get(&[0, 1], 0), 0.1);
        assert_eq!(q.get(&[0, 2], 0), 0.1);
        assert_eq!(q.get(&[2, 0], 0), 0.9);
        assert_eq!(q.get(&[1, 1], 0), 0.0);

        let n = PredTensor::new(0, 2, 1, vec![0.7]).unwrap();
        let u = expand(&n, 1).unwrap();
        assert_eq!(u.data(), &[0.7, 0.7]);
    }

    #[test]
    fn expand_errors() {
        let p = PredTensor::zeros(2, 3, 1);
        assert_eq!(expand(&p, 2), Err(TensorError::BreadthOverflow { arity: 2, breadth: 2 }));
        let q = PredTensor::zeros(2, 2, 1);
        assert_eq!(expand(&q, 3), Err(TensorError::NoFreshObject { arity: 2, m: 2 }));
    }

    #[test]
    fn reduce_examples() {
        let out = reduce(&PredTensor::new(2, 2, 1, vec![0.0, 0.3, 0.7, 0.0]).unwrap()).unwrap();
        assert_eq!(out.data(), &[0.3, 0.3, 0.7, 0.7]);

        let zeros = reduce(&PredTensor::zeros(2, 4, 2)).unwrap();
        assert!(zeros.data().iter().all(|&v| v == 0.0));
        assert_eq!(zeros.channels(), 4);

        let mut t = PredTensor::zeros(2, 3, 1);
        t.set(&[0, 1], 0, 0.1);
        t.set(&[0, 2], 0, 0.9);
        let out = reduce(&t).unwrap();
        assert_eq!(out.get(&[0], 0), 0.9);
        assert_eq!(out.get(&[0], 1), 0.1);

        assert_eq!(reduce(&PredTensor::zeros(0, 3, 1)), Err(TensorError::ReduceNullary));
    }

    #[test]
    fn reduce_channel_order_is_exists_block_then_forall_block() {
        let t = PredTensor::from_fn(1, 3, 2, |i, c| if c == 0 { 0.1 * (i[0] + 1) as f64 } else { 0.5 });
        let out = reduce(&t).unwrap();
        assert_eq!(out.data(), &[0.30000000000000004, 0.5, 0.1, 0.5]);
    }

    #[test]
    fn concat_examples() {
        let a = PredTensor::from_fn(1, 3, 2, |_, c| c as f64 * 0.1);
        let b = PredTensor::from_fn(1, 3, 3, |_, c| 0.5 + c as f64 * 0.1);
        let ab = concat_channels(&[&a, &b]).unwrap();
        assert_eq!(ab.channels(), 5);
        assert_eq!(ab.get(&[1], 0), 0.0);
        assert_eq!(ab.get(&[1], 2), 0.5);
        assert_eq!(concat_channels(&[&a]).unwrap(), a);
        assert_eq!(concat_channels(&[]), Err(TensorError::EmptyConcat));
        let c = PredTensor::zeros(2, 3, 1);
        assert!(matches!(concat_channels(&[&a, &c]), Err(TensorError::ShapeMismatch(..))));
    }

    #[test]
    fn new_rejects_out_of_range_and_zeroes_diagonal() {
        assert!(matches!(
            PredTensor::new(1, 2, 1, vec![0.5, 1.5]),
            Err(TensorError::OutOfRange { index: 1, .. })
        ));
        let t = PredTensor::new(2, 2, 1, vec![0.4, 0.2, 0.8, 0.6]).unwrap();
        assert_eq!(t.data(), &[0.0, 0.2, 0.8, 0.0]);
    }

    fn arb_tensor(max_r: usize) -> impl Strategy<Value = PredTensor> {
        (0..=max_r, 1usize..=5, 0usize..=3).prop_flat_map(|(r, m, c)| {
            let m = m.max(r);
            proptest::collection::vec(0.0f64..=1.0, cube_len(m, r) * c)
                .prop_map(move |data| PredTensor::new(r, m, c, data).unwrap())
        })
    }

    proptest! {
        #[test]
        fn reduce_of_expand_recovers_input(t in arb_tensor(2)) {
            prop_assume!(t.num_objects() > t.arity());
            let back = reduce(&expand(&t, 3).unwrap()).unwrap();
            let c = t.channels();
            let exists: Vec<usize> = (0..c).collect();
            let forall: Vec<usize> = (c..2 * c).collect();
            prop_assert_eq!(&back.select_channels(&exists), &t);
            prop_assert_eq!(&back.select_channels(&forall), &t);
        }

        #[test]
        fn ops_commute_with_relabeling(t in arb_tensor(3), seed in any::<u64>()) {
            use rand::seq::SliceRandom;
            let mut rng = crate::rng::rng_from(seed);
            let mut pi: Vec<usize> = (0..t.num_objects()).collect();
            pi.shuffle(&mut rng);
            let moved = t.relabel(&pi).unwrap();
            prop_assert_eq!(permute_all(&moved), permute_all(&t).relabel(&pi).unwrap());
            if t.arity() > 0 {
                prop_assert_eq!(reduce(&moved).unwrap(), reduce(&t).unwrap().relabel(&pi).unwrap());
            }
            if t.num_objects() > t.arity() {
                prop_assert_eq!(expand(&moved, 4).unwrap(), expand(&t, 4).unwrap().relabel(&pi).unwrap());
            }
        }

        #[test]
        fn ops_stay_in_unit_interval(t in arb_tensor(3)) {
            let inside = |x: &PredTensor| x.data().iter().all(|v| (0.0..=1.0).contains(v));
            prop_assert!(inside(&permute_all(&t)));
            if t.arity() > 0 { prop_assert!(inside(&reduce(&t).unwrap())); }
            if t.num_objects() > t.arity() { prop_assert!(inside(&expand(&t, 4).unwrap())); }
            prop_assert!(inside(&concat_channels(&[&t, &t]).unwrap()));
        }
    }

    #[test]
    fn channel_count_laws() {
        for r in 0..=3usize {
            for m in 1..=6usize {
                for c in 0..=4usize {
                    let t = PredTensor::zeros(r, m, c);
                    assert_eq!(permute_all(&t).channels(), factorial(r) * c);
                    if r > 0 {
                        assert_eq!(reduce(&t).unwrap().channels(), 2 * c);
                    }
                    if m > r {
                        assert_eq!(expand(&t, 3).map(|e| e.channels()).unwrap_or(c), c);
                    }
                }
            }
        }
    }

    #[test]
    fn ops_are_deterministic() {
        let t = PredTensor::from_fn(3, 4, 2, |i, c| ((i[0] * 7 + i[1] * 3 + i[2] + c) % 10) as f64 / 10.0);
        let a = reduce(&permute_all(&t)).unwrap();
        let b = reduce(&permute_all(&t)).unwrap();
        assert_eq!(
            a.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
            b.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>()
        );
    }
}
