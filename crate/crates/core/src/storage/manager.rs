use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::AtomicBool;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{load_mai, load_npi, persist_mai, persist_npi, select_configuration, Configuration};
use crate::error::{EverestError, Result};
use crate::iqa::ActivationCache;
use crate::mai::{self, MaximumActivationIndex};
use crate::npi::NeuralPartitionIndex;
use crate::nta::{Executor, QuerySpec, RoundEvent, TopKResult};
use crate::oracle::brute_force_topk;
use crate::source::{ActivationMatrix, ActivationSource, LayerId};

const CATALOG_FILE: &str = "catalog.json";
const CATALOG_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IndexState {
    Absent,
    Built,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CatalogEntry {
    pub layer_id: LayerId,
    pub state: IndexState,
    pub npi_path: Option<String>,
    pub mai_path: Option<String>,
    pub bytes: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct IndexCatalog {
    pub version: u32,
    pub budget_bytes: u64,
    pub layers: Vec<CatalogEntry>,
}

impl IndexCatalog {
    pub fn new(budget_bytes: u64, layer_count: usize) -> Self {
        Self {
            version: CATALOG_VERSION,
            budget_bytes,
            layers: (0..layer_count as u32)
                .map(|l| CatalogEntry {
                    layer_id: LayerId(l),
                    state: IndexState::Absent,
                    npi_path: None,
                    mai_path: None,
                    bytes: 0,
                })
                .collect(),
        }
    }

    pub fn used_bytes(&self) -> u64 {
        self.layers.iter().map(|e| e.bytes).sum()
    }

    pub fn entry(&self, layer: LayerId) -> Option<&CatalogEntry> {
        self.layers.get(layer.index())
    }

    pub fn is_built(&self, layer: LayerId) -> bool {
        self.entry(layer).is_some_and(|e| e.state == IndexState::Built)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let catalog: Self = serde_json::from_slice(&fs::read(path)?)?;
        if catalog.version != CATALOG_VERSION {
            return Err(EverestError::format(0, format!("catalog version {}", catalog.version)));
        }
        Ok(catalog)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        super::write_atomic(path, &serde_json::to_vec_pretty(self)?)
    }
}

/// One layer's indexes, loaded in memory.
#[derive(Debug)]
pub struct LayerIndex {
    pub npi: NeuralPartitionIndex,
    pub mai: Option<MaximumActivationIndex>,
}

impl LayerIndex {
    pub fn build(acts: &ActivationMatrix, config: &Configuration) -> Result<Self> {
        let n_partitions = config.n_partitions.min(1 << acts.n_inputs().max(1).ilog2());
        let head = mai::entry_count(config.ratio, acts.n_inputs());
        if head == 0 || n_partitions < 2 || head >= acts.n_inputs() {
            return Ok(Self {
                npi: NeuralPartitionIndex::build(acts, n_partitions)?,
                mai: None,
            });
        }
        let mai = MaximumActivationIndex::build(acts, config.ratio)?;
        Ok(Self {
            npi: NeuralPartitionIndex::build_with_head(acts, n_partitions, mai.entry_count())?,
            mai: Some(mai),
        })
    }
}

#[derive(Debug)]
pub struct EnsureOutcome {
    /// The layer was scanned in full, so the pending query can be answered
    /// from `activations` without a second inference pass.
    pub answered_during_build: bool,
    pub persisted: bool,
    pub activations: Option<ActivationMatrix>,
}

#[derive(Debug)]
pub struct QueryOutcome {
    pub result: TopKResult,
    pub answered_during_build: bool,
    /// Index bytes consulted for this query.
    pub index_bytes_read: u64,
}

/// Builds and persists layer indexes the first time a layer is queried,
/// within a global byte budget. Layers are indexed first come, first served
/// and never evicted.
#[derive(Debug)]
pub struct IndexManager {
    dir: PathBuf,
    catalog: IndexCatalog,
    config: Option<Configuration>,
    loaded: HashMap<LayerId, Arc<LayerIndex>>,
}

/// Bytes an index costs beyond the PID and entry formulas: headers, bounds,
/// per-row padding and the rounding up of each neuron's entry count.
fn overhead(layer_count: usize, total_neurons: usize, n_partitions: usize) -> u64 {
    (layer_count * (28 + 24)) as u64 + total_neurons as u64 * (1 + n_partitions as u64 * 8 + 8)
}

impl IndexManager {
    /// Opens (or starts) the catalog in `dir` and derives a configuration
    /// from the budget. A budget too small to index anything leaves every
    /// layer to full scans.
    pub fn open(dir: &Path, budget_bytes: u64, source: &dyn ActivationSource, batch_size: usize) -> Result<Self> {
        let n = source.n_inputs();
        let widths = (0..source.layer_count() as u32)
            .map(|l| source.layer_width(LayerId(l)))
            .collect::<Result<Vec<_>>>()?;
        let total: usize = widths.iter().sum();
        let max_parts = 1usize << (n / batch_size.max(1)).max(1).ilog2();
        let usable = budget_bytes.saturating_sub(overhead(widths.len(), total, max_parts));
        let config = match select_configuration(usable, n, total, batch_size) {
            Ok(c) => Some(c),
            Err(EverestError::Config(_)) if batch_size > 0 => None,
            Err(e) => return Err(e),
        };
        Self::with_configuration(dir, budget_bytes, source.layer_count(), config)
    }

    pub fn with_configuration(
        dir: &Path,
        budget_bytes: u64,
        layer_count: usize,
        config: Option<Configuration>,
    ) -> Result<Self> {
        fs::create_dir_all(dir)?;
        let path = dir.join(CATALOG_FILE);
        let mut catalog = if path.exists() {
            IndexCatalog::load(&path)?
        } else {
            IndexCatalog::new(budget_bytes, layer_count)
        };
        if catalog.layers.len() != layer_count {
            return Err(EverestError::Config(format!(
                "catalog in {} lists {} layers, the model has {layer_count}",
                dir.display(),
                catalog.layers.len()
            )));
        }
        catalog.budget_bytes = budget_bytes;
        catalog.save(&path)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            catalog,
            config,
            loaded: HashMap::new(),
        })
    }

    pub fn catalog(&self) -> &IndexCatalog {
        &self.catalog
    }

    pub fn config(&self) -> Option<Configuration> {
        self.config
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// The built index for `layer`, loaded from disk on first use.
    pub fn index(&mut self, layer: LayerId) -> Result<Option<Arc<LayerIndex>>> {
        if let Some(idx) = self.loaded.get(&layer) {
            return Ok(Some(idx.clone()));
        }
        let Some(entry) = self.catalog.entry(layer).filter(|e| e.state == IndexState::Built) else {
            return Ok(None);
        };
        let npi = load_npi(&self.dir.join(entry.npi_path.as_deref().unwrap_or_default()))?;
        let mai = match &entry.mai_path {
            Some(p) => Some(load_mai(&self.dir.join(p))?),
            None => None,
        };
        let idx = Arc::new(LayerIndex { npi, mai });
        self.loaded.insert(layer, idx.clone());
        Ok(Some(idx))
    }

    /// Makes sure `layer` is indexed, scanning it in full when it is not.
    /// The scan's activations come back so the caller can answer from them.
    pub fn ensure_indexed(&mut self, layer: LayerId, source: &dyn ActivationSource) -> Result<EnsureOutcome> {
        source.check_layer(layer)?;
        if self.catalog.is_built(layer) {
            return Ok(EnsureOutcome {
                answered_during_build: false,
                persisted: false,
                activations: None,
            });
        }
        let ids: Vec<u32> = (0..source.n_inputs() as u32).collect();
        let batch = self.config.map_or(64, |c| c.batch_size);
        let acts = source.infer_layer(layer, &ids, batch)?;
        let persisted = match self.config {
            Some(config) => self.try_persist(layer, &acts, &config)?,
            None => false,
        };
        Ok(EnsureOutcome {
            answered_during_build: true,
            persisted,
            activations: Some(acts),
        })
    }

    fn try_persist(&mut self, layer: LayerId, acts: &ActivationMatrix, config: &Configuration) -> Result<bool> {
        let idx = LayerIndex::build(acts, config)?;
        let npi_bytes = idx.npi.to_bytes()?.len() as u64;
        let mai_bytes = idx
            .mai
            .as_ref()
            .map_or(Ok(0), |m| m.to_bytes().map(|b| b.len() as u64))?;
        if self.catalog.used_bytes() + npi_bytes + mai_bytes > self.catalog.budget_bytes {
            return Ok(false);
        }
        let npi_name = format!("layer-{}.npi", layer.0);
        let mai_name = format!("layer-{}.mai", layer.0);
        let written = (|| -> Result<u64> {
            let mut total = persist_npi(&self.dir.join(&npi_name), &idx.npi)?;
            if let Some(m) = &idx.mai {
                total += persist_mai(&self.dir.join(&mai_name), m)?;
            }
            let entry = &mut self.catalog.layers[layer.index()];
            *entry = CatalogEntry {
                layer_id: layer,
                state: IndexState::Built,
                npi_path: Some(npi_name.clone()),
                mai_path: idx.mai.as_ref().map(|_| mai_name.clone()),
                bytes: total,
            };
            self.catalog.save(&self.dir.join(CATALOG_FILE))?;
            Ok(total)
        })();
        if let Err(e) = written {
            // leave the layer absent and the directory without stray files
            self.catalog.layers[layer.index()] = CatalogEntry {
                layer_id: layer,
                state: IndexState::Absent,
                npi_path: None,
                mai_path: None,
                bytes: 0,
            };
            let _ = fs::remove_file(self.dir.join(&npi_name));
            let _ = fs::remove_file(self.dir.join(&mai_name));
            return Err(e);
        }
        self.loaded.insert(layer, Arc::new(idx));
        Ok(true)
    }

    /// Answers `spec`, indexing its layer on first contact.
    pub fn query(
        &mut self,
        spec: &QuerySpec,
        source: &dyn ActivationSource,
        cache: Option<&mut ActivationCache>,
        stop: Option<&AtomicBool>,
        observer: Option<&mut dyn FnMut(&RoundEvent)>,
    ) -> Result<QueryOutcome> {
        spec.validate(source.n_inputs(), source.layer_width(spec.layer)?)?;
        let ensured = self.ensure_indexed(spec.layer, source)?;
        if let Some(acts) = ensured.activations {
            let mut result = brute_force_topk(spec, &acts)?;
            result.stats.threshold_trace = vec![result.stats.final_threshold];
            if let Some(observer) = observer {
                observer(&RoundEvent {
                    round: 0,
                    threshold: result.stats.final_threshold,
                    confirmed: result.entries.clone(),
                    theta: Some(1.0),
                });
            }
            return Ok(QueryOutcome {
                result,
                answered_during_build: true,
                index_bytes_read: 0,
            });
        }
        let idx = self
            .index(spec.layer)?
            .ok_or_else(|| EverestError::ContractViolation(format!("{} marked built but missing", spec.layer)))?;
        let batch = self.config.map_or(64, |c| c.batch_size);
        let mut ex = Executor::new(source, &idx.npi).mai(idx.mai.as_ref()).batch_size(batch);
        if let Some(cache) = cache {
            ex = ex.cache(cache);
        }
        if let Some(stop) = stop {
            ex = ex.stop_signal(stop);
        }
        if let Some(observer) = observer {
            ex = ex.on_round(observer);
        }
        let result = ex.run(spec)?;
        Ok(QueryOutcome {
            result,
            answered_during_build: false,
            index_bytes_read: self.catalog.entry(spec.layer).map_or(0, |e| e.bytes),
        })
    }
}
