//! Activation providers standing in for DNN inference.
//!
//! Every provider implements [`ActivationSource`]. The provided
//! [`ActivationSource::infer_layer`] method splits a request into batches and
//! charges the [`InferenceLedger`], so strategies built on different
//! providers stay comparable.

mod actv;
mod synthetic;

use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};

use crate::error::{EverestError, Result};

pub use actv::{
    decode_activation_file, encode_activation_file, read_activation_file, write_activation_file, MatrixSource,
};
pub use synthetic::{SyntheticModel, SyntheticModelSpec};

/// Position of a layer in model order.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LayerId(pub u32);

impl LayerId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for LayerId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "L{}", self.0)
    }
}

/// Dense activations of one layer, rows are inputs and columns neurons.
#[derive(Clone, Debug, PartialEq)]
pub struct ActivationMatrix {
    layer: LayerId,
    n_inputs: usize,
    n_neurons: usize,
    values: Vec<f32>,
}

impl ActivationMatrix {
    pub fn new(layer: LayerId, n_inputs: usize, n_neurons: usize, values: Vec<f32>) -> Result<Self> {
        if values.len() != n_inputs * n_neurons {
            return Err(EverestError::ContractViolation(format!(
                "matrix {n_inputs}x{n_neurons} needs {} values, got {}",
                n_inputs * n_neurons,
                values.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(EverestError::ContractViolation(format!(
                "non-finite activation at input {}, neuron {}",
                pos / n_neurons.max(1),
                pos % n_neurons.max(1)
            )));
        }
        Ok(Self {
            layer,
            n_inputs,
            n_neurons,
            values,
        })
    }

    /// Builds a matrix from per-input rows.
    pub fn from_rows(layer: LayerId, rows: &[Vec<f32>]) -> Result<Self> {
        let n_neurons = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != n_neurons) {
            return Err(EverestError::ContractViolation("ragged rows".into()));
        }
        Self::new(layer, rows.len(), n_neurons, rows.concat())
    }

    pub fn empty(layer: LayerId, n_neurons: usize) -> Self {
        Self {
            layer,
            n_inputs: 0,
            n_neurons,
            values: Vec::new(),
        }
    }

    pub fn layer(&self) -> LayerId {
        self.layer
    }

    pub fn n_inputs(&self) -> usize {
        self.n_inputs
    }

    pub fn n_neurons(&self) -> usize {
        self.n_neurons
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    #[inline]
    pub fn get(&self, input: usize, neuron: usize) -> f32 {
        self.values[input * self.n_neurons + neuron]
    }

    pub fn row(&self, input: usize) -> &[f32] {
        &self.values[input * self.n_neurons..(input + 1) * self.n_neurons]
    }

    /// Activations of one neuron across all inputs.
    pub fn column(&self, neuron: usize) -> Vec<f32> {
        (0..self.n_inputs).map(|i| self.get(i, neuron)).collect()
    }

    /// Copies the rows named by `ids` into a new matrix, in that order.
    pub fn select_rows(&self, ids: &[u32]) -> Result<Self> {
        let mut values = Vec::with_capacity(ids.len() * self.n_neurons);
        for &id in ids {
            let id = id as usize;
            if id >= self.n_inputs {
                return Err(EverestError::out_of_range("inputID", id, self.n_inputs));
            }
            values.extend_from_slice(self.row(id));
        }
        Ok(Self {
            layer: self.layer,
            n_inputs: ids.len(),
            n_neurons: self.n_neurons,
            values,
        })
    }

    pub fn byte_size(&self) -> u64 {
        (self.values.len() * 4) as u64
    }
}

/// Counters for simulated inference work. Monotone, shareable across threads.
#[derive(Debug, Default)]
pub struct InferenceLedger {
    inputs_run: AtomicU64,
    batches_run: AtomicU64,
    unit_cost: AtomicU64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct LedgerSnapshot {
    pub inputs_run: u64,
    pub batches_run: u64,
    pub unit_cost: u64,
}

impl LedgerSnapshot {
    /// Work done between `earlier` and `self`.
    pub fn since(&self, earlier: &LedgerSnapshot) -> LedgerSnapshot {
        LedgerSnapshot {
            inputs_run: self.inputs_run - earlier.inputs_run,
            batches_run: self.batches_run - earlier.batches_run,
            unit_cost: self.unit_cost - earlier.unit_cost,
        }
    }
}

impl InferenceLedger {
    pub fn record_batch(&self, inputs: usize, depth: usize) {
        if inputs == 0 {
            return;
        }
        self.inputs_run.fetch_add(inputs as u64, Ordering::Relaxed);
        self.batches_run.fetch_add(1, Ordering::Relaxed);
        self.unit_cost.fetch_add((inputs * depth) as u64, Ordering::Relaxed);
    }

    pub fn snapshot(&self) -> LedgerSnapshot {
        LedgerSnapshot {
            inputs_run: self.inputs_run.load(Ordering::Relaxed),
            batches_run: self.batches_run.load(Ordering::Relaxed),
            unit_cost: self.unit_cost.load(Ordering::Relaxed),
        }
    }
}

/// A provider of layer activations with simulated inference cost.
///
/// Implementors supply raw computation through [`compute_rows`]; callers go
/// through [`infer_layer`] so that every forward pass is charged to the
/// ledger. The cost of running one input up to a layer is that layer's depth.
///
/// [`compute_rows`]: ActivationSource::compute_rows
/// [`infer_layer`]: ActivationSource::infer_layer
pub trait ActivationSource: Send + Sync {
    fn n_inputs(&self) -> usize;

    fn layer_count(&self) -> usize;

    /// Number of neurons in `layer`.
    fn layer_width(&self, layer: LayerId) -> Result<usize>;

    /// Appends the activations of `ids` at `layer` to `out`, row-major by input.
    /// No accounting happens here.
    fn compute_rows(&self, layer: LayerId, ids: &[u32], out: &mut Vec<f32>) -> Result<()>;

    fn ledger(&self) -> &InferenceLedger;

    fn layer_depth(&self, layer: LayerId) -> usize {
        layer.index() + 1
    }

    fn check_layer(&self, layer: LayerId) -> Result<()> {
        if layer.index() >= self.layer_count() {
            return Err(EverestError::LayerOutOfRange {
                layer: layer.0,
                count: self.layer_count(),
            });
        }
        Ok(())
    }

    /// Runs inference for `ids` at `layer` in batches of `batch_size`.
    ///
    /// Row `r` of the result belongs to `ids[r]`.
    fn infer_layer(&self, layer: LayerId, ids: &[u32], batch_size: usize) -> Result<ActivationMatrix> {
        self.check_layer(layer)?;
        if batch_size == 0 {
            return Err(EverestError::Config("batch size must be at least 1".into()));
        }
        let width = self.layer_width(layer)?;
        let n = self.n_inputs();
        if let Some(&bad) = ids.iter().find(|&&id| id as usize >= n) {
            return Err(EverestError::out_of_range("inputID", bad as usize, n));
        }
        if ids.is_empty() {
            return Ok(ActivationMatrix::empty(layer, width));
        }
        let depth = self.layer_depth(layer);
        let mut values = Vec::with_capacity(ids.len() * width);
        for batch in ids.chunks(batch_size) {
            self.compute_rows(layer, batch, &mut values)?;
            self.ledger().record_batch(batch.len(), depth);
        }
        ActivationMatrix::new(layer, ids.len(), width, values)
    }

    /// Runs every input through the whole model once, returning all layers.
    /// Charged as a single pass to the deepest layer.
    fn infer_all_layers(&self, batch_size: usize) -> Result<Vec<ActivationMatrix>> {
        if batch_size == 0 {
            return Err(EverestError::Config("batch size must be at least 1".into()));
        }
        let ids: Vec<u32> = (0..self.n_inputs() as u32).collect();
        let last = self.layer_count().saturating_sub(1);
        let depth = self.layer_depth(LayerId(last as u32));
        let mut out = Vec::with_capacity(self.layer_count());
        for l in 0..self.layer_count() {
            let layer = LayerId(l as u32);
            let width = self.layer_width(layer)?;
            let mut values = Vec::with_capacity(ids.len() * width);
            self.compute_rows(layer, &ids, &mut values)?;
            out.push(ActivationMatrix::new(layer, ids.len(), width, values)?);
        }
        for batch in ids.chunks(batch_size) {
            self.ledger().record_batch(batch.len(), depth);
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> MatrixSource {
        let m = ActivationMatrix::new(LayerId(0), 4, 2, vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0]).unwrap();
        MatrixSource::new(vec![m]).unwrap()
    }

    #[test]
    fn empty_request_leaves_ledger_alone() {
        let src = tiny();
        let m = src.infer_layer(LayerId(0), &[], 3).unwrap();
        assert_eq!(m.n_inputs(), 0);
        assert_eq!(src.ledger().snapshot(), LedgerSnapshot::default());
    }

    #[test]
    fn batches_are_ceiling_of_request_over_batch_size() {
        let src = tiny();
        src.infer_layer(LayerId(0), &[0, 1, 2], 2).unwrap();
        let s = src.ledger().snapshot();
        assert_eq!(s.batches_run, 2);
        assert_eq!(s.inputs_run, 3);
        assert_eq!(s.unit_cost, 3);
    }

    #[test]
    fn unknown_layer_is_rejected() {
        let src = tiny();
        assert!(matches!(
            src.infer_layer(LayerId(3), &[0], 1),
            Err(EverestError::LayerOutOfRange { layer: 3, .. })
        ));
    }

    #[test]
    fn rows_follow_request_order() {
        let src = tiny();
        let m = src.infer_layer(LayerId(0), &[3, 0], 8).unwrap();
        assert_eq!(m.row(0), &[6.0, 7.0]);
        assert_eq!(m.row(1), &[0.0, 1.0]);
    }

    #[test]
    fn non_finite_values_are_rejected() {
        assert!(ActivationMatrix::new(LayerId(0), 1, 1, vec![f32::NAN]).is_err());
    }
}
