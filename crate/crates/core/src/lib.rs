//! Top-k queries over neural-network activations.
//!
//! Each layer gets an equi-depth partition index per neuron and, optionally,
//! a list of each neuron's largest activations. A threshold algorithm then
//! answers "which inputs activate this neuron group most like input `s`"
//! (or "most strongly") while running inference on as few inputs as it can.

pub mod baselines;
mod codec;
pub mod demo;
pub mod distance;
pub mod error;
pub mod iqa;
pub mod mai;
pub mod npi;
pub mod nta;
pub mod oracle;
pub mod service;
pub mod source;
pub mod storage;
pub mod verify;
pub mod workloads;

pub use distance::{DistanceFn, QueryMode};
pub use error::{EverestError, Result};
pub use nta::{Executor, QuerySpec, TopKResult};
pub use source::{ActivationMatrix, ActivationSource, LayerId};
