//! Index persistence, budgeted configuration selection and the incremental
//! index manager.

mod manager;

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{EverestError, Result};
use crate::mai::MaximumActivationIndex;
use crate::npi::NeuralPartitionIndex;

pub use manager::{CatalogEntry, EnsureOutcome, IndexCatalog, IndexManager, IndexState, LayerIndex, QueryOutcome};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct StorageBudget {
    pub total_bytes: u64,
    /// Every activation of every layer stored as f32.
    pub full_materialization_bytes: u64,
}

impl StorageBudget {
    /// `fraction` of full materialization, rounded down to a byte.
    pub fn fraction_of(fraction: f64, total_neurons: usize, n_inputs: usize) -> Self {
        let full = total_neurons as u64 * n_inputs as u64 * 4;
        Self {
            total_bytes: (full as f64 * fraction).floor() as u64,
            full_materialization_bytes: full,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Configuration {
    pub n_partitions: usize,
    pub ratio: f64,
    pub batch_size: usize,
}

/// Bytes of packed partition ids for `n_partitions` (no padding, rounded up).
pub fn npi_cost(n_inputs: usize, n_neurons: usize, n_partitions: usize) -> u64 {
    let bits = n_partitions.trailing_zeros() as u64;
    (n_inputs as u64 * n_neurons as u64 * bits).div_ceil(8)
}

/// Picks the largest power-of-two partition count no greater than
/// `n_inputs / batch_size` whose PID cost is strictly below the budget, then
/// spends what remains on maximum-activation entries (8 bytes each).
pub fn select_configuration(
    budget_bytes: u64,
    n_inputs: usize,
    n_neurons: usize,
    batch_size: usize,
) -> Result<Configuration> {
    if batch_size == 0 {
        return Err(EverestError::Config("batch size must be at least 1".into()));
    }
    if n_inputs == 0 || n_neurons == 0 {
        return Err(EverestError::Config("nothing to index".into()));
    }
    let cap = (n_inputs / batch_size).max(1);
    let mut n_partitions = 1usize << cap.ilog2();
    while n_partitions >= 2 && npi_cost(n_inputs, n_neurons, n_partitions) >= budget_bytes {
        n_partitions /= 2;
    }
    if n_partitions < 2 && cap >= 2 {
        return Err(EverestError::Config(format!(
            "budget of {budget_bytes} bytes cannot hold even 2 partitions ({} bytes)",
            npi_cost(n_inputs, n_neurons, 2)
        )));
    }
    let rest = budget_bytes.saturating_sub(npi_cost(n_inputs, n_neurons, n_partitions));
    let ratio = (rest as f64 / (n_inputs as f64 * n_neurons as f64 * 8.0)).min(1.0);
    Ok(Configuration {
        n_partitions,
        ratio,
        batch_size,
    })
}

/// Writes through a temporary file so a crash never leaves a torn index.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path).inspect_err(|_| {
        let _ = fs::remove_file(&tmp);
    })?;
    Ok(())
}

/// Returns the number of bytes written.
pub fn persist_npi(path: &Path, idx: &NeuralPartitionIndex) -> Result<u64> {
    let bytes = idx.to_bytes()?;
    write_atomic(path, &bytes)?;
    Ok(bytes.len() as u64)
}

pub fn load_npi(path: &Path) -> Result<NeuralPartitionIndex> {
    NeuralPartitionIndex::from_bytes(&fs::read(path)?)
}

pub fn persist_mai(path: &Path, mai: &MaximumActivationIndex) -> Result<u64> {
    let bytes = mai.to_bytes()?;
    write_atomic(path, &bytes)?;
    Ok(bytes.len() as u64)
}

pub fn load_mai(path: &Path) -> Result<MaximumActivationIndex> {
    MaximumActivationIndex::from_bytes(&fs::read(path)?)
}
