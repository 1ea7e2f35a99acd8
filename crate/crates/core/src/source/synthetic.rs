//! Seeded fully-connected ReLU network used in place of a real DNN.
//!
//! Weights and inputs come from an xorshift64* stream seeded through
//! splitmix64, so any implementation of the same recipe reproduces the same
//! activations bit for bit:
//!
//! * input `i` draws `inputDim` values from stream `mix(seed, 2^32 + i)`;
//! * layer `l` draws its `width_l * fan_in` weights row by row from stream
//!   `mix(seed, l)`;
//! * each raw draw `u` in `[-1, 1]` is scaled by `sqrt(6 / fan_in)`;
//! * `h_l = relu(W_l h_{l-1})`, accumulated in f32 in column order.

use serde::{Deserialize, Serialize};

use super::{ActivationMatrix, ActivationSource, InferenceLedger, LayerId, MatrixSource};
use crate::error::{EverestError, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Nonlinearity {
    #[default]
    Relu,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SyntheticModelSpec {
    pub seed: u64,
    pub layer_widths: Vec<usize>,
    pub input_dim: usize,
    pub n_inputs: usize,
    #[serde(default)]
    pub nonlinearity: Nonlinearity,
}

impl SyntheticModelSpec {
    pub fn new(seed: u64, layer_widths: Vec<usize>, input_dim: usize, n_inputs: usize) -> Self {
        Self {
            seed,
            layer_widths,
            input_dim,
            n_inputs,
            nonlinearity: Nonlinearity::Relu,
        }
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// xorshift64* generator.
#[derive(Clone, Debug)]
pub(crate) struct XorShift64Star(u64);

impl XorShift64Star {
    pub fn new(seed: u64, stream: u64) -> Self {
        let s = splitmix64(seed ^ splitmix64(stream));
        Self(if s == 0 { 0x2545_F491_4F6C_DD1D } else { s })
    }

    pub fn next_u64(&mut self) -> u64 {
        let mut x = self.0;
        x ^= x >> 12;
        x ^= x << 25;
        x ^= x >> 27;
        self.0 = x;
        x.wrapping_mul(0x2545_F491_4F6C_DD1D)
    }

    /// Uniform in `[-1, 1]`.
    pub fn next_signed(&mut self) -> f32 {
        let unit = (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64;
        (unit * 2.0 - 1.0) as f32
    }
}

#[derive(Debug)]
pub struct SyntheticModel {
    spec: SyntheticModelSpec,
    // weights[l] is width_l x fan_in_l, row-major
    weights: Vec<Vec<f32>>,
    ledger: InferenceLedger,
}

impl SyntheticModel {
    pub fn new(spec: SyntheticModelSpec) -> Result<Self> {
        if spec.layer_widths.is_empty() {
            return Err(EverestError::Config("model needs at least one layer".into()));
        }
        if spec.input_dim == 0 || spec.layer_widths.contains(&0) {
            return Err(EverestError::Config("layer widths and input dim must be >= 1".into()));
        }
        let mut weights = Vec::with_capacity(spec.layer_widths.len());
        let mut fan_in = spec.input_dim;
        for (l, &width) in spec.layer_widths.iter().enumerate() {
            let mut rng = XorShift64Star::new(spec.seed, l as u64);
            let scale = (6.0 / fan_in as f32).sqrt();
            let w = (0..width * fan_in).map(|_| rng.next_signed() * scale).collect();
            weights.push(w);
            fan_in = width;
        }
        Ok(Self {
            spec,
            weights,
            ledger: InferenceLedger::default(),
        })
    }

    pub fn spec(&self) -> &SyntheticModelSpec {
        &self.spec
    }

    /// Raw input vector for `input`.
    pub fn input_vector(&self, input: u32) -> Vec<f32> {
        let mut rng = XorShift64Star::new(self.spec.seed, (1u64 << 32) + input as u64);
        (0..self.spec.input_dim).map(|_| rng.next_signed()).collect()
    }

    /// Weights of `layer`, row-major `width x fan_in`.
    pub fn weights(&self, layer: LayerId) -> &[f32] {
        &self.weights[layer.index()]
    }

    fn forward(&self, input: u32, upto: usize, mut sink: impl FnMut(usize, &[f32])) {
        let mut h = self.input_vector(input);
        for l in 0..=upto {
            let w = &self.weights[l];
            let fan_in = h.len();
            let next: Vec<f32> = w
                .chunks_exact(fan_in)
                .map(|row| {
                    let mut acc = 0.0f32;
                    for (a, b) in row.iter().zip(&h) {
                        acc += a * b;
                    }
                    acc.max(0.0)
                })
                .collect();
            sink(l, &next);
            h = next;
        }
    }

    /// Computes every layer for every input and freezes the result into a
    /// [`MatrixSource`]. Useful when many queries hit the same model.
    pub fn materialize(&self) -> Result<MatrixSource> {
        let n = self.spec.n_inputs;
        let mut layers: Vec<Vec<f32>> = self
            .spec
            .layer_widths
            .iter()
            .map(|w| Vec::with_capacity(w * n))
            .collect();
        let last = self.spec.layer_widths.len() - 1;
        for input in 0..n as u32 {
            self.forward(input, last, |l, row| layers[l].extend_from_slice(row));
        }
        let matrices = layers
            .into_iter()
            .enumerate()
            .map(|(l, v)| ActivationMatrix::new(LayerId(l as u32), n, self.spec.layer_widths[l], v))
            .collect::<Result<Vec<_>>>()?;
        MatrixSource::new(matrices)
    }
}

impl ActivationSource for SyntheticModel {
    fn n_inputs(&self) -> usize {
        self.spec.n_inputs
    }

    fn layer_count(&self) -> usize {
        self.spec.layer_widths.len()
    }

    fn layer_width(&self, layer: LayerId) -> Result<usize> {
        self.check_layer(layer)?;
        Ok(self.spec.layer_widths[layer.index()])
    }

    fn compute_rows(&self, layer: LayerId, ids: &[u32], out: &mut Vec<f32>) -> Result<()> {
        self.check_layer(layer)?;
        let target = layer.index();
        for &id in ids {
            self.forward(id, target, |l, row| {
                if l == target {
                    out.extend_from_slice(row);
                }
            });
        }
        Ok(())
    }

    fn ledger(&self) -> &InferenceLedger {
        &self.ledger
    }
}
