//! Maximum Activation Index: the top `ratio` fraction of `(inputID,
//! activation)` pairs of every neuron, stored with their exact activations.
//! These entries form partition 0 of a co-built partition index.
//!
//! File layout, little-endian:
//!
//! ```text
//! "MAI1" | version u32 | layerId u32 | nNeurons u32 | entryCount u32 | ratio f32
//! | per neuron: entryCount x { inputID u32, activation f32 }
//! ```

use crate::codec::{put_f32, put_u32, to_u32, ByteReader};
use crate::error::{EverestError, Result};
use crate::npi::descending_order;
use crate::source::{ActivationMatrix, LayerId};

const MAGIC: &[u8; 4] = b"MAI1";
const VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MaiEntry {
    pub input: u32,
    pub activation: f32,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MaximumActivationIndex {
    layer: LayerId,
    ratio: f32,
    n_neurons: usize,
    entry_count: usize,
    entries: Vec<MaiEntry>,
}

/// `ceil(ratio * n_inputs)`, ignoring floating-point dust above an integer.
pub fn entry_count(ratio: f64, n_inputs: usize) -> usize {
    let raw = ratio * n_inputs as f64;
    ((raw - 1e-9 * raw.max(1.0)).ceil().max(0.0) as usize).min(n_inputs)
}

impl MaximumActivationIndex {
    pub fn build(acts: &ActivationMatrix, ratio: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&ratio) {
            return Err(EverestError::Config(format!("ratio must be in [0, 1], got {ratio}")));
        }
        let n_neurons = acts.n_neurons();
        let entry_count = entry_count(ratio, acts.n_inputs());
        let mut entries = Vec::with_capacity(entry_count * n_neurons);
        for neuron in 0..n_neurons {
            let column = acts.column(neuron);
            let order = descending_order(&column);
            entries.extend(order[..entry_count].iter().map(|&input| MaiEntry {
                input,
                activation: column[input as usize],
            }));
        }
        Ok(Self {
            layer: acts.layer(),
            ratio: ratio as f32,
            n_neurons,
            entry_count,
            entries,
        })
    }

    pub fn layer(&self) -> LayerId {
        self.layer
    }

    pub fn ratio(&self) -> f32 {
        self.ratio
    }

    pub fn n_neurons(&self) -> usize {
        self.n_neurons
    }

    pub fn entry_count(&self) -> usize {
        self.entry_count
    }

    pub fn is_empty(&self) -> bool {
        self.entry_count == 0
    }

    /// Entries of `neuron`, descending by activation.
    pub fn entries(&self, neuron: usize) -> Result<&[MaiEntry]> {
        if neuron >= self.n_neurons {
            return Err(EverestError::out_of_range("neuron", neuron, self.n_neurons));
        }
        Ok(&self.entries[neuron * self.entry_count..(neuron + 1) * self.entry_count])
    }

    /// The stored activation of `input` if it is one of `neuron`'s entries.
    pub fn contains(&self, neuron: usize, input: u32) -> Result<Option<f32>> {
        Ok(self
            .entries(neuron)?
            .iter()
            .find(|e| e.input == input)
            .map(|e| e.activation))
    }

    pub fn storage_bytes(&self) -> usize {
        self.entry_count * self.n_neurons * 8
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut out = Vec::with_capacity(24 + self.storage_bytes());
        out.extend_from_slice(MAGIC);
        put_u32(&mut out, VERSION);
        put_u32(&mut out, self.layer.0);
        put_u32(&mut out, to_u32(self.n_neurons, "nNeurons")?);
        put_u32(&mut out, to_u32(self.entry_count, "entryCount")?);
        put_f32(&mut out, self.ratio);
        for e in &self.entries {
            put_u32(&mut out, e.input);
            put_f32(&mut out, e.activation);
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = ByteReader::new(bytes);
        r.magic(MAGIC)?;
        let at = r.offset();
        let version = r.u32("version")?;
        if version != VERSION {
            return Err(EverestError::format(at, format!("unsupported version {version}")));
        }
        let layer = LayerId(r.u32("layerId")?);
        let n_neurons = r.u32("nNeurons")? as usize;
        let entry_count = r.u32("entryCount")? as usize;
        let at = r.offset();
        let ratio = r.f32("ratio")?;
        if !(0.0..=1.0).contains(&ratio) {
            return Err(EverestError::format(at, format!("ratio {ratio} outside [0, 1]")));
        }
        let total = n_neurons
            .checked_mul(entry_count)
            .ok_or_else(|| EverestError::format(at, "entry table overflows"))?;
        if r.remaining() < total.saturating_mul(8) {
            return Err(EverestError::format(
                r.offset(),
                format!(
                    "truncated entry table: need {} bytes, have {}",
                    total * 8,
                    r.remaining()
                ),
            ));
        }
        let mut entries = Vec::with_capacity(total);
        for _ in 0..total {
            let input = r.u32("inputID")?;
            let activation = r.f32("activation")?;
            entries.push(MaiEntry { input, activation });
        }
        r.finish()?;
        Ok(Self {
            layer,
            ratio,
            n_neurons,
            entry_count,
            entries,
        })
    }
}
