//! Comparison strategies. All of them return the same answers and differ
//! only in what they spend: inference, bytes read and bytes kept on disk.
//! Disk traffic is simulated through byte counters.

use std::collections::HashMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::Serialize;

use crate::error::{EverestError, Result};
use crate::iqa::ActivationCache;
use crate::nta::{QuerySpec, TopKResult};
use crate::oracle::brute_force_topk;
use crate::source::{ActivationMatrix, ActivationSource, LayerId};
use crate::storage::IndexManager;

/// Inference units charged for reading one byte from disk in the priority
/// model. One unit is one input pushed through one layer.
pub const SCAN_UNITS_PER_BYTE: f64 = 1.0 / 4096.0;

#[derive(Clone, Debug, PartialEq)]
pub enum Strategy {
    PreprocessAll,
    ReprocessAll,
    LruCache {
        budget_bytes: u64,
    },
    PriorityCache {
        budget_bytes: u64,
    },
    /// `None` budgets are filled in by the caller (see [`Strategy::with_default_budget`]).
    Everest {
        budget_bytes: Option<u64>,
        iqa_budget_bytes: u64,
    },
}

impl Strategy {
    pub fn with_default_budget(self, budget_bytes: u64) -> Self {
        match self {
            Strategy::Everest {
                budget_bytes: None,
                iqa_budget_bytes,
            } => Strategy::Everest {
                budget_bytes: Some(budget_bytes),
                iqa_budget_bytes,
            },
            other => other,
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Strategy::PreprocessAll => f.write_str("preprocess"),
            Strategy::ReprocessAll => f.write_str("reprocess"),
            Strategy::LruCache { budget_bytes } => write!(f, "lru:{budget_bytes}"),
            Strategy::PriorityCache { budget_bytes } => write!(f, "priority:{budget_bytes}"),
            Strategy::Everest { budget_bytes: None, .. } => f.write_str("everest"),
            Strategy::Everest {
                budget_bytes: Some(b), ..
            } => write!(f, "everest:{b}"),
        }
    }
}

impl FromStr for Strategy {
    type Err = EverestError;

    fn from_str(s: &str) -> Result<Self> {
        let (name, arg) = match s.split_once(':') {
            Some((n, a)) => (n, Some(a)),
            None => (s, None),
        };
        let bytes = |a: Option<&str>| -> Result<u64> {
            let a = a.ok_or_else(|| EverestError::Config(format!("strategy {name} needs :BYTES")))?;
            a.parse()
                .map_err(|e| EverestError::Config(format!("bad byte count {a:?}: {e}")))
        };
        match name {
            "preprocess" => Ok(Strategy::PreprocessAll),
            "reprocess" => Ok(Strategy::ReprocessAll),
            "lru" => Ok(Strategy::LruCache {
                budget_bytes: bytes(arg)?,
            }),
            "priority" => Ok(Strategy::PriorityCache {
                budget_bytes: bytes(arg)?,
            }),
            "everest" => Ok(Strategy::Everest {
                budget_bytes: arg.map(|a| bytes(Some(a))).transpose()?,
                iqa_budget_bytes: 0,
            }),
            other => Err(EverestError::Config(format!("unknown strategy {other:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct CostLedger {
    pub inference_units: u64,
    pub bytes_read: u64,
    /// Bytes held on disk after the query.
    pub bytes_stored: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct LayerPriority {
    pub layer: LayerId,
    pub saved_cost_per_byte: f64,
}

fn layer_bytes(source: &dyn ActivationSource, layer: LayerId) -> Result<u64> {
    Ok(source.n_inputs() as u64 * source.layer_width(layer)? as u64 * 4)
}

/// Greedy by saved inference per byte, assuming every layer is queried
/// equally often. A layer that does not fit is skipped, smaller ones may follow.
pub fn priority_layers(source: &dyn ActivationSource, budget_bytes: u64) -> Result<Vec<LayerPriority>> {
    let n = source.n_inputs() as f64;
    let mut all = Vec::new();
    for l in 0..source.layer_count() as u32 {
        let layer = LayerId(l);
        let bytes = layer_bytes(source, layer)? as f64;
        let saved = n * source.layer_depth(layer) as f64 - bytes * SCAN_UNITS_PER_BYTE;
        all.push(LayerPriority {
            layer,
            saved_cost_per_byte: (saved / bytes).max(0.0),
        });
    }
    all.sort_by(|a, b| {
        b.saved_cost_per_byte
            .total_cmp(&a.saved_cost_per_byte)
            .then(a.layer.cmp(&b.layer))
    });
    let mut used = 0;
    let mut chosen = Vec::new();
    for p in all {
        let bytes = layer_bytes(source, p.layer)?;
        if p.saved_cost_per_byte > 0.0 && used + bytes <= budget_bytes {
            used += bytes;
            chosen.push(p);
        }
    }
    Ok(chosen)
}

/// A strategy with its caches and stored state.
pub struct Runner<'s> {
    strategy: Strategy,
    source: &'s dyn ActivationSource,
    batch_size: usize,
    stored: HashMap<LayerId, ActivationMatrix>,
    lru_order: Vec<LayerId>,
    prepared: bool,
    everest: Option<(IndexManager, ActivationCache)>,
    _scratch: Option<tempfile::TempDir>,
}

impl<'s> Runner<'s> {
    /// `index_dir` is where the indexed strategy keeps its indexes; a temporary
    /// directory is used when it is `None`.
    pub fn new(
        strategy: Strategy,
        source: &'s dyn ActivationSource,
        batch_size: usize,
        index_dir: Option<PathBuf>,
    ) -> Result<Self> {
        let mut scratch = None;
        let everest = match &strategy {
            Strategy::Everest {
                budget_bytes,
                iqa_budget_bytes,
            } => {
                let budget =
                    budget_bytes.ok_or_else(|| EverestError::Config("everest strategy needs a budget".into()))?;
                let dir = match index_dir {
                    Some(d) => d,
                    None => {
                        let t = tempfile::tempdir()?;
                        let p = t.path().to_path_buf();
                        scratch = Some(t);
                        p
                    }
                };
                let manager = IndexManager::open(&dir, budget, source, batch_size)?;
                Some((manager, ActivationCache::new(*iqa_budget_bytes)))
            }
            _ => None,
        };
        Ok(Self {
            strategy,
            source,
            batch_size,
            stored: HashMap::new(),
            lru_order: Vec::new(),
            prepared: false,
            everest,
            _scratch: scratch,
        })
    }

    pub fn strategy(&self) -> &Strategy {
        &self.strategy
    }

    fn stored_bytes(&self) -> u64 {
        self.stored.values().map(ActivationMatrix::byte_size).sum()
    }

    fn scan(&self, layer: LayerId) -> Result<ActivationMatrix> {
        let ids: Vec<u32> = (0..self.source.n_inputs() as u32).collect();
        self.source.infer_layer(layer, &ids, self.batch_size)
    }

    /// Materializes everything the strategy keeps up front. The first call
    /// to [`answer`](Self::answer) does this implicitly and is charged for it.
    fn prepare(&mut self) -> Result<()> {
        if std::mem::replace(&mut self.prepared, true) {
            return Ok(());
        }
        match &self.strategy {
            Strategy::PreprocessAll => {
                for m in self.source.infer_all_layers(self.batch_size)? {
                    self.stored.insert(m.layer(), m);
                }
            }
            Strategy::PriorityCache { budget_bytes } => {
                let chosen = priority_layers(self.source, *budget_bytes)?;
                if let Some(deepest) = chosen.iter().map(|p| p.layer).max() {
                    // one pass up to the deepest chosen layer yields all of them
                    let ids: Vec<u32> = (0..self.source.n_inputs() as u32).collect();
                    let depth = self.source.layer_depth(deepest);
                    for p in &chosen {
                        let mut values = Vec::new();
                        self.source.compute_rows(p.layer, &ids, &mut values)?;
                        let width = self.source.layer_width(p.layer)?;
                        self.stored
                            .insert(p.layer, ActivationMatrix::new(p.layer, ids.len(), width, values)?);
                    }
                    for batch in ids.chunks(self.batch_size) {
                        self.source.ledger().record_batch(batch.len(), depth);
                    }
                }
            }
            _ => {}
        }
        Ok(())
    }

    pub fn answer(&mut self, spec: &QuerySpec) -> Result<(TopKResult, CostLedger)> {
        let before = self.source.ledger().snapshot();
        self.prepare()?;
        let layer = spec.layer;
        let mut bytes_read = 0;
        let result = match &self.strategy {
            Strategy::ReprocessAll => brute_force_topk(spec, &self.scan(layer)?)?,
            Strategy::PreprocessAll | Strategy::PriorityCache { .. } => match self.stored.get(&layer) {
                Some(m) => {
                    bytes_read = m.byte_size();
                    brute_force_topk(spec, m)?
                }
                None => brute_force_topk(spec, &self.scan(layer)?)?,
            },
            Strategy::LruCache { budget_bytes } => {
                let budget = *budget_bytes;
                if let Some(m) = self.stored.get(&layer) {
                    bytes_read = m.byte_size();
                    let r = brute_force_topk(spec, m)?;
                    self.lru_order.retain(|&l| l != layer);
                    self.lru_order.push(layer);
                    r
                } else {
                    let m = self.scan(layer)?;
                    let r = brute_force_topk(spec, &m)?;
                    if m.byte_size() <= budget {
                        while self.stored_bytes() + m.byte_size() > budget {
                            let victim = self.lru_order.remove(0);
                            self.stored.remove(&victim);
                        }
                        self.stored.insert(layer, m);
                        self.lru_order.push(layer);
                    }
                    r
                }
            }
            Strategy::Everest { .. } => {
                let (manager, cache) = self.everest.as_mut().expect("built in new");
                let out = manager.query(spec, self.source, Some(cache), None, None)?;
                bytes_read = out.index_bytes_read;
                out.result
            }
        };
        let bytes_stored = match &self.everest {
            Some((m, _)) => m.catalog().used_bytes(),
            None => self.stored_bytes(),
        };
        Ok((
            result,
            CostLedger {
                inference_units: self.source.ledger().snapshot().since(&before).unit_cost,
                bytes_read,
                bytes_stored,
            },
        ))
    }
}
