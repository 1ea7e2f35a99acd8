//! In-memory activation store and the `ACTV` file format.
//!
//! Layout, little-endian:
//!
//! ```text
//! "ACTV" | version u32 = 1 | layerCount u32
//! per layer: layerId u32 | nInputs u32 | nNeurons u32 | f32[nInputs * nNeurons] (row-major by input)
//! ```

use std::fs;
use std::path::Path;

use super::{ActivationMatrix, ActivationSource, InferenceLedger, LayerId};
use crate::codec::{put_f32s, put_u32, to_u32, ByteReader};
use crate::error::{EverestError, Result};

const MAGIC: &[u8; 4] = b"ACTV";
const VERSION: u32 = 1;

/// Serves stored activation matrices while still charging simulated
/// inference cost, so it can stand in for a model.
#[derive(Debug)]
pub struct MatrixSource {
    layers: Vec<ActivationMatrix>,
    ledger: InferenceLedger,
}

impl MatrixSource {
    pub fn new(layers: Vec<ActivationMatrix>) -> Result<Self> {
        let n = layers.first().map_or(0, ActivationMatrix::n_inputs);
        for (i, m) in layers.iter().enumerate() {
            if m.layer().index() != i {
                return Err(EverestError::ContractViolation(format!(
                    "layer at position {i} is tagged {}",
                    m.layer()
                )));
            }
            if m.n_inputs() != n {
                return Err(EverestError::ContractViolation(format!(
                    "layer {i} has {} inputs, expected {n}",
                    m.n_inputs()
                )));
            }
        }
        Ok(Self {
            layers,
            ledger: InferenceLedger::default(),
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::new(read_activation_file(path)?)
    }

    pub fn layer(&self, layer: LayerId) -> Result<&ActivationMatrix> {
        self.check_layer(layer)?;
        Ok(&self.layers[layer.index()])
    }

    pub fn layers(&self) -> &[ActivationMatrix] {
        &self.layers
    }
}

impl ActivationSource for MatrixSource {
    fn n_inputs(&self) -> usize {
        self.layers.first().map_or(0, ActivationMatrix::n_inputs)
    }

    fn layer_count(&self) -> usize {
        self.layers.len()
    }

    fn layer_width(&self, layer: LayerId) -> Result<usize> {
        Ok(self.layer(layer)?.n_neurons())
    }

    fn compute_rows(&self, layer: LayerId, ids: &[u32], out: &mut Vec<f32>) -> Result<()> {
        let m = self.layer(layer)?;
        for &id in ids {
            out.extend_from_slice(m.row(id as usize));
        }
        Ok(())
    }

    fn ledger(&self) -> &InferenceLedger {
        &self.ledger
    }
}

pub fn encode_activation_file(layers: &[ActivationMatrix]) -> Result<Vec<u8>> {
    let payload: usize = layers.iter().map(|m| m.values().len() * 4 + 12).sum();
    let mut out = Vec::with_capacity(12 + payload);
    out.extend_from_slice(MAGIC);
    put_u32(&mut out, VERSION);
    put_u32(&mut out, to_u32(layers.len(), "layerCount")?);
    for m in layers {
        put_u32(&mut out, m.layer().0);
        put_u32(&mut out, to_u32(m.n_inputs(), "nInputs")?);
        put_u32(&mut out, to_u32(m.n_neurons(), "nNeurons")?);
        put_f32s(&mut out, m.values());
    }
    Ok(out)
}

pub fn decode_activation_file(bytes: &[u8]) -> Result<Vec<ActivationMatrix>> {
    let mut r = ByteReader::new(bytes);
    r.magic(MAGIC)?;
    let at = r.offset();
    let version = r.u32("version")?;
    if version != VERSION {
        return Err(EverestError::format(at, format!("unsupported version {version}")));
    }
    let count = r.u32("layerCount")? as usize;
    let mut layers = Vec::with_capacity(count.min(1024));
    for _ in 0..count {
        let at = r.offset();
        let layer = LayerId(r.u32("layerId")?);
        let n_inputs = r.u32("nInputs")? as usize;
        let n_neurons = r.u32("nNeurons")? as usize;
        let len = n_inputs
            .checked_mul(n_neurons)
            .ok_or_else(|| EverestError::format(at, "layer dimensions overflow"))?;
        let values = r.f32s(len, "activations")?;
        let m = ActivationMatrix::new(layer, n_inputs, n_neurons, values)
            .map_err(|e| EverestError::format(at, e.to_string()))?;
        layers.push(m);
    }
    r.finish()?;
    Ok(layers)
}

pub fn write_activation_file(path: impl AsRef<Path>, layers: &[ActivationMatrix]) -> Result<()> {
    fs::write(path, encode_activation_file(layers)?)?;
    Ok(())
}

pub fn read_activation_file(path: impl AsRef<Path>) -> Result<Vec<ActivationMatrix>> {
    decode_activation_file(&fs::read(path)?)
}
