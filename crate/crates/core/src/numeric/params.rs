//! Named model parameters with a deterministic flat view.
//!
//! Parameters live in insertion order; the flat view concatenates every
//! tensor row-major in that order, so the name → slice mapping is stable
//! across runs as long as construction order is (model construction
//! iterates types/relations/heads in fixed index order). Values are
//! `Arc`-shared so a training step can hand them to the tape without
//! copying; the optimizer mutates them copy-on-write after the tape is
//! dropped.

use std::collections::HashMap;
use std::sync::Arc;

use ndarray::Array2;

use crate::numeric::{NumericError, Real, Result};

#[derive(Debug, Clone)]
pub struct ModelParams<F: Real> {
    names: Vec<String>,
    values: Vec<Arc<Array2<F>>>,
    /// Flat-view offset of each tensor; last entry is the total length.
    offsets: Vec<usize>,
    index: HashMap<String, usize>,
}

impl<F: Real> Default for ModelParams<F> {
    fn default() -> Self {
        Self::new()
    }
}

impl<F: Real> ModelParams<F> {
    pub fn new() -> Self {
        ModelParams {
            names: Vec::new(),
            values: Vec::new(),
            offsets: vec![0],
            index: HashMap::new(),
        }
    }

    /// Register a tensor under a unique name; returns its index.
    pub fn insert(&mut self, name: impl Into<String>, value: Array2<F>) -> Result<usize> {
        let name = name.into();
        if self.index.contains_key(&name) {
            return Err(NumericError::DuplicateParam { name });
        }
        let idx = self.values.len();
        self.index.insert(name.clone(), idx);
        self.names.push(name);
        let last = *self.offsets.last().unwrap();
        self.offsets.push(last + value.len());
        self.values.push(Arc::new(value));
        Ok(idx)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn idx(&self, name: &str) -> Result<usize> {
        self.index
            .get(name)
            .copied()
            .ok_or_else(|| NumericError::UnknownParam {
                name: name.to_string(),
            })
    }

    pub fn name(&self, idx: usize) -> &str {
        &self.names[idx]
    }

    pub fn value(&self, idx: usize) -> &Arc<Array2<F>> {
        &self.values[idx]
    }

    pub fn get(&self, name: &str) -> Result<&Array2<F>> {
        Ok(self.values[self.idx(name)?].as_ref())
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Array2<F>)> {
        self.names
            .iter()
            .map(|n| n.as_str())
            .zip(self.values.iter().map(|v| v.as_ref()))
    }

    /// Total number of scalar coordinates across all tensors.
    pub fn flat_len(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    /// Flat-view offset of tensor `idx`.
    pub fn offset(&self, idx: usize) -> usize {
        self.offsets[idx]
    }

    /// Concatenate every tensor row-major in insertion order.
    pub fn to_flat(&self) -> Vec<F> {
        let mut out = Vec::with_capacity(self.flat_len());
        for v in &self.values {
            out.extend(v.iter().copied());
        }
        out
    }

    /// Overwrite every tensor from a flat vector laid out as [`Self::to_flat`].
    pub fn set_flat(&mut self, flat: &[F]) -> Result<()> {
        if flat.len() != self.flat_len() {
            return Err(NumericError::FlatLenMismatch {
                expected: self.flat_len(),
                got: flat.len(),
            });
        }
        for (i, v) in self.values.iter_mut().enumerate() {
            let chunk = &flat[self.offsets[i]..self.offsets[i + 1]];
            let arr = Arc::make_mut(v);
            for (dst, src) in arr.iter_mut().zip(chunk.iter()) {
                *dst = *src;
            }
        }
        Ok(())
    }

    /// Map a flat coordinate to its (tensor index, within-tensor offset).
    fn locate(&self, coord: usize) -> (usize, usize) {
        debug_assert!(coord < self.flat_len());
        let t = self.offsets.partition_point(|&o| o <= coord) - 1;
        (t, coord - self.offsets[t])
    }

    /// Read a single flat coordinate (row-major within its tensor).
    pub fn get_coord(&self, coord: usize) -> F {
        let (t, off) = self.locate(coord);
        *self.values[t]
            .as_slice()
            .expect("standard layout")
            .get(off)
            .unwrap()
    }

    /// Overwrite a single flat coordinate; copy-on-write on first touch.
    pub fn set_coord(&mut self, coord: usize, value: F) {
        let (t, off) = self.locate(coord);
        let arr = Arc::make_mut(&mut self.values[t]);
        arr.as_slice_mut().expect("standard layout")[off] = value;
    }

    /// Human-readable label for a flat coordinate: (name, within-tensor offset).
    pub fn describe_coord(&self, coord: usize) -> (String, usize) {
        let (t, off) = self.locate(coord);
        (self.names[t].clone(), off)
    }

    /// Convert every tensor into another scalar type (f32 <-> f64).
    pub fn cast<T: Real>(&self) -> ModelParams<T> {
        let mut out = ModelParams::new();
        for (name, v) in self.iter() {
            let arr = v.mapv(|x| crate::numeric::scalar::<T>(crate::numeric::to_f64(x)));
            out.insert(name, arr).expect("names unique by construction");
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn flat_round_trip_preserves_order_and_values() {
        let mut p: ModelParams<f64> = ModelParams::new();
        p.insert("a", array![[1.0, 2.0], [3.0, 4.0]]).unwrap();
        p.insert("b", array![[5.0], [6.0]]).unwrap();
        assert_eq!(p.flat_len(), 6);
        assert_eq!(p.to_flat(), vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let mut q = p.clone();
        q.set_flat(&[9.0, 8.0, 7.0, 6.0, 5.0, 4.0]).unwrap();
        assert_eq!(q.get("a").unwrap()[(1, 1)], 6.0);
        assert_eq!(q.get("b").unwrap()[(1, 0)], 4.0);
        // The original is untouched (copy-on-write).
        assert_eq!(p.get("a").unwrap()[(0, 0)], 1.0);
    }

    #[test]
    fn coord_accessors_match_flat_layout() {
        let mut p: ModelParams<f64> = ModelParams::new();
        p.insert("a", array![[1.0, 2.0]]).unwrap();
        p.insert("b", array![[3.0], [4.0]]).unwrap();
        assert_eq!(p.get_coord(0), 1.0);
        assert_eq!(p.get_coord(3), 4.0);
        let mut q = p.clone();
        q.set_coord(2, -1.0);
        assert_eq!(q.get("b").unwrap()[(0, 0)], -1.0);
        assert_eq!(p.get("b").unwrap()[(0, 0)], 3.0);
        assert_eq!(q.describe_coord(3), ("b".to_string(), 1));
    }

    #[test]
    fn duplicate_name_rejected() {
        let mut p: ModelParams<f32> = ModelParams::new();
        p.insert("w", array![[0.0f32]]).unwrap();
        assert!(matches!(
            p.insert("w", array![[1.0f32]]),
            Err(NumericError::DuplicateParam { .. })
        ));
    }

    #[test]
    fn set_flat_rejects_length_mismatch() {
        let mut p: ModelParams<f64> = ModelParams::new();
        p.insert("a", array![[1.0, 2.0]]).unwrap();
        assert!(matches!(
            p.set_flat(&[1.0]),
            Err(NumericError::FlatLenMismatch { .. })
        ));
    }

    #[test]
    fn cast_round_trip() {
        let mut p: ModelParams<f32> = ModelParams::new();
        p.insert("a", array![[1.5f32, -2.25]]).unwrap();
        let q: ModelParams<f64> = p.cast();
        assert_eq!(q.get("a").unwrap()[(0, 1)], -2.25);
        let back: ModelParams<f32> = q.cast();
        assert_eq!(back.get("a").unwrap()[(0, 0)], 1.5);
    }
}
