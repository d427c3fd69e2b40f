use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::DenseArray;
use crate::error::{Error, Result};

/// Named collection of arrays, iterated in key order.
///
/// Holds generator weights and, with the same keys and shapes, their
/// gradients.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ParamSet {
    entries: BTreeMap<String, DenseArray>,
}

impl ParamSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, value: DenseArray) {
        self.entries.insert(name.into(), value);
    }

    pub fn get(&self, name: &str) -> Option<&DenseArray> {
        self.entries.get(name)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut DenseArray> {
        self.entries.get_mut(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &DenseArray)> {
        self.entries.iter()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&String, &mut DenseArray)> {
        self.entries.iter_mut()
    }

    pub fn names(&self) -> impl Iterator<Item = &String> {
        self.entries.keys()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Total number of scalar values across all entries.
    pub fn num_values(&self) -> usize {
        self.entries.values().map(DenseArray::len).sum()
    }

    /// A set with the same keys and shapes, all zeros.
    pub fn zeros_like(&self) -> Self {
        Self {
            entries: self
                .entries
                .iter()
                .map(|(k, v)| (k.clone(), DenseArray::zeros(v.shape())))
                .collect(),
        }
    }

    pub fn same_layout(&self, other: &Self) -> bool {
        self.entries.len() == other.entries.len()
            && self
                .entries
                .iter()
                .zip(other.entries.iter())
                .all(|((ka, va), (kb, vb))| ka == kb && va.shape() == vb.shape())
    }

    pub fn norm(&self) -> f64 {
        self.entries
            .values()
            .map(DenseArray::squared_norm)
            .sum::<f64>()
            .sqrt()
    }

    pub fn all_finite(&self) -> bool {
        self.entries.values().all(DenseArray::all_finite)
    }

    pub fn scale(&mut self, factor: f64) {
        for v in self.entries.values_mut() {
            v.data_mut().iter_mut().for_each(|x| *x *= factor);
        }
    }

    /// `self += alpha * other`; layouts must agree.
    pub fn axpy(&mut self, alpha: f64, other: &Self) -> Result<()> {
        if !self.same_layout(other) {
            return Err(Error::Contract("parameter sets differ in layout".into()));
        }
        for (dst, src) in self.entries.values_mut().zip(other.entries.values()) {
            for (d, s) in dst.data_mut().iter_mut().zip(src.data()) {
                *d += alpha * s;
            }
        }
        Ok(())
    }

    /// All values concatenated in key order.
    pub fn flatten(&self) -> Vec<f64> {
        self.entries
            .values()
            .flat_map(|v| v.data().iter().copied())
            .collect()
    }

    /// Inverse of [`ParamSet::flatten`] using `self` as the layout template.
    pub fn with_flat(&self, flat: &[f64]) -> Result<Self> {
        if flat.len() != self.num_values() {
            return Err(Error::Contract(format!(
                "expected {} values, got {}",
                self.num_values(),
                flat.len()
            )));
        }
        let mut offset = 0;
        let mut out = self.clone();
        for v in out.entries.values_mut() {
            let n = v.len();
            v.data_mut().copy_from_slice(&flat[offset..offset + n]);
            offset += n;
        }
        Ok(out)
    }
}
