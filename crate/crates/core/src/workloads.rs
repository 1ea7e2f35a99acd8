//! Query workloads and the multi-strategy harness.
//!
//! Multi-query workloads move between layers with fixed probabilities of
//! staying, returning to an earlier layer or touching a new one. Sequences
//! for the activation cache keep target and layer fixed and swap a few group
//! neurons per query.

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};
use std::io::Write;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::baselines::{CostLedger, Runner};
use crate::error::{EverestError, Result};
use crate::nta::{QuerySpec, TopKResult};
use crate::source::{ActivationSource, InferenceLedger, LayerId, LedgerSnapshot};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", tag = "kind")]
pub enum WorkloadKind {
    W1,
    W2,
    W3,
    IqaSeq { n_size: usize, n_replace: usize },
}

impl WorkloadKind {
    /// `(p_same, p_prev, p_new)`, or `None` for uniform layer choice.
    pub fn transitions(&self) -> Option<(f64, f64, f64)> {
        match self {
            WorkloadKind::W1 => Some((0.5, 0.3, 0.2)),
            WorkloadKind::W2 => Some((0.5, 0.4, 0.1)),
            _ => None,
        }
    }
}

impl std::str::FromStr for WorkloadKind {
    type Err = EverestError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "w1" => Ok(WorkloadKind::W1),
            "w2" => Ok(WorkloadKind::W2),
            "w3" => Ok(WorkloadKind::W3),
            other => {
                let bad = || EverestError::Config(format!("unknown workload {other:?}"));
                let rest = other.strip_prefix("iqa:").ok_or_else(bad)?;
                let (a, b) = rest.split_once(',').ok_or_else(bad)?;
                Ok(WorkloadKind::IqaSeq {
                    n_size: a.parse().map_err(|_| bad())?,
                    n_replace: b.parse().map_err(|_| bad())?,
                })
            }
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum NeuronGroupKind {
    /// The target's most activated neurons.
    Top,
    /// Random neurons from the top half of the target's non-zero neurons.
    #[default]
    RandHigh,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct WorkloadSpec {
    pub kind: WorkloadKind,
    pub queries: usize,
    pub seed: u64,
    pub k: usize,
    pub group_size: usize,
    pub group_kind: NeuronGroupKind,
}

impl WorkloadSpec {
    pub fn new(kind: WorkloadKind, queries: usize, seed: u64) -> Self {
        Self {
            kind,
            queries,
            seed,
            k: 20,
            group_size: 3,
            group_kind: NeuronGroupKind::RandHigh,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Workload {
    pub queries: Vec<QuerySpec>,
    /// Inference spent choosing groups, kept apart from strategy costs.
    pub generation: LedgerSnapshot,
}

struct Generator<'a> {
    source: &'a dyn ActivationSource,
    rng: ChaCha8Rng,
    ledger: InferenceLedger,
}

impl Generator<'_> {
    fn row(&self, layer: LayerId, target: u32) -> Result<Vec<f32>> {
        let mut row = Vec::new();
        self.source.compute_rows(layer, &[target], &mut row)?;
        self.ledger.record_batch(1, self.source.layer_depth(layer));
        Ok(row)
    }

    /// Neurons eligible for a random-high group: the upper half of the
    /// target's non-zero activations, or every neuron if none fire.
    fn high_pool(row: &[f32]) -> Vec<usize> {
        let mut firing: Vec<usize> = (0..row.len()).filter(|&i| row[i] > 0.0).collect();
        if firing.is_empty() {
            return (0..row.len()).collect();
        }
        firing.sort_by(|&a, &b| row[b].total_cmp(&row[a]).then(a.cmp(&b)));
        firing.truncate(firing.len().div_ceil(2));
        firing
    }

    fn group(&mut self, row: &[f32], size: usize, kind: NeuronGroupKind) -> Vec<usize> {
        let size = size.min(row.len());
        match kind {
            NeuronGroupKind::Top => {
                let mut all: Vec<usize> = (0..row.len()).collect();
                all.sort_by(|&a, &b| row[b].total_cmp(&row[a]).then(a.cmp(&b)));
                all.truncate(size);
                all
            }
            NeuronGroupKind::RandHigh => {
                let pool = Self::high_pool(row);
                let mut g: Vec<usize> = pool
                    .choose_multiple(&mut self.rng, size.min(pool.len()))
                    .copied()
                    .collect();
                // top up from the rest of the layer when the pool is small
                let mut rest: Vec<usize> = (0..row.len()).filter(|n| !g.contains(n)).collect();
                rest.shuffle(&mut self.rng);
                g.extend(rest.into_iter().take(size - g.len()));
                g
            }
        }
    }

    fn query(&mut self, spec: &WorkloadSpec, layer: LayerId) -> Result<QuerySpec> {
        let target = self.rng.gen_range(0..self.source.n_inputs() as u32);
        let row = self.row(layer, target)?;
        let group = self.group(&row, spec.group_size, spec.group_kind);
        Ok(QuerySpec::similar(layer, target, group, spec.k))
    }
}

/// Deterministic in `(spec, source shape and values)`.
pub fn generate(spec: &WorkloadSpec, source: &dyn ActivationSource) -> Result<Workload> {
    let layers = source.layer_count();
    if layers == 0 || source.n_inputs() == 0 {
        return Err(EverestError::Config("workload needs a non-empty model".into()));
    }
    let mut gen = Generator {
        source,
        rng: ChaCha8Rng::seed_from_u64(spec.seed),
        ledger: InferenceLedger::default(),
    };
    let mut queries = Vec::with_capacity(spec.queries);
    match spec.kind {
        WorkloadKind::IqaSeq { n_size, n_replace } => {
            if n_replace > n_size {
                return Err(EverestError::Config(format!(
                    "cannot replace {n_replace} of {n_size} neurons"
                )));
            }
            let layer = LayerId(gen.rng.gen_range(0..layers as u32));
            let target = gen.rng.gen_range(0..source.n_inputs() as u32);
            let row = gen.row(layer, target)?;
            let mut group = gen.group(&row, n_size, NeuronGroupKind::RandHigh);
            let pool = Generator::high_pool(&row);
            for q in 0..spec.queries {
                if q > 0 {
                    swap_neurons(&mut gen.rng, &mut group, &pool, row.len(), n_replace);
                }
                queries.push(QuerySpec::similar(layer, target, group.clone(), spec.k));
            }
        }
        WorkloadKind::W3 => {
            for _ in 0..spec.queries {
                let layer = LayerId(gen.rng.gen_range(0..layers as u32));
                queries.push(gen.query(spec, layer)?);
            }
        }
        kind => {
            let (p_same, p_prev, _) = kind.transitions().expect("multi-layer workload");
            let mut visited: Vec<LayerId> = Vec::new();
            let mut current = LayerId(gen.rng.gen_range(0..layers as u32));
            for q in 0..spec.queries {
                if q > 0 {
                    current = next_layer(&mut gen.rng, current, &visited, layers, p_same, p_prev);
                }
                if !visited.contains(&current) {
                    visited.push(current);
                }
                queries.push(gen.query(spec, current)?);
            }
        }
    }
    Ok(Workload {
        queries,
        generation: gen.ledger.snapshot(),
    })
}

/// One transition. Missing choices (no earlier layer, no new layer) hand
/// their probability to whichever of the others exist.
fn next_layer(
    rng: &mut ChaCha8Rng,
    current: LayerId,
    visited: &[LayerId],
    layers: usize,
    p_same: f64,
    p_prev: f64,
) -> LayerId {
    let prev: Vec<LayerId> = visited.iter().copied().filter(|&l| l != current).collect();
    let fresh: Vec<LayerId> = (0..layers as u32)
        .map(LayerId)
        .filter(|l| !visited.contains(l))
        .collect();
    let p_new = 1.0 - p_same - p_prev;
    let (w_prev, w_new) = match (prev.is_empty(), fresh.is_empty()) {
        (false, false) => (p_prev, p_new),
        (false, true) => (p_prev + p_new, 0.0),
        (true, false) => (0.0, p_prev + p_new),
        (true, true) => (0.0, 0.0),
    };
    let u = rng.gen::<f64>() * (p_same + w_prev + w_new);
    if u < p_same {
        current
    } else if u < p_same + w_prev {
        *prev.choose(rng).expect("non-empty")
    } else {
        *fresh.choose(rng).expect("non-empty")
    }
}

fn swap_neurons(rng: &mut ChaCha8Rng, group: &mut [usize], pool: &[usize], width: usize, n: usize) {
    let mut slots: Vec<usize> = (0..group.len()).collect();
    slots.shuffle(rng);
    for &slot in slots.iter().take(n) {
        let mut candidates: Vec<usize> = pool.iter().copied().filter(|c| !group.contains(c)).collect();
        if candidates.is_empty() {
            candidates = (0..width).filter(|c| !group.contains(c)).collect();
        }
        if let Some(&c) = candidates.choose(rng) {
            group[slot] = c;
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct HarnessRow {
    pub query_idx: usize,
    pub strategy: String,
    pub inference_units: u64,
    pub bytes_read: u64,
    pub bytes_stored: u64,
    pub cumulative_units: u64,
    #[serde(skip)]
    pub result_digest: u64,
}

/// Digest of a result's distance sequence; equal across strategies that agree.
pub fn result_digest(result: &TopKResult) -> u64 {
    let mut h = DefaultHasher::new();
    for d in result.distances() {
        d.to_bits().hash(&mut h);
    }
    h.finish()
}

/// Runs every query through every runner in turn, strategy by strategy so
/// the shared ledger attributes costs correctly.
pub fn run_harness(queries: &[QuerySpec], runners: &mut [Runner<'_>]) -> Result<Vec<HarnessRow>> {
    let mut rows = Vec::with_capacity(queries.len() * runners.len());
    for runner in runners.iter_mut() {
        let name = runner.strategy().to_string();
        let mut cumulative = 0;
        for (i, q) in queries.iter().enumerate() {
            let (
                result,
                CostLedger {
                    inference_units,
                    bytes_read,
                    bytes_stored,
                },
            ) = runner.answer(q)?;
            cumulative += inference_units;
            rows.push(HarnessRow {
                query_idx: i,
                strategy: name.clone(),
                inference_units,
                bytes_read,
                bytes_stored,
                cumulative_units: cumulative,
                result_digest: result_digest(&result),
            });
        }
    }
    Ok(rows)
}

pub fn write_csv<W: Write>(rows: &[HarnessRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    if rows.is_empty() {
        w.write_record([
            "queryIdx",
            "strategy",
            "inferenceUnits",
            "bytesRead",
            "bytesStored",
            "cumulativeUnits",
        ])
        .map_err(csv_err)?;
    }
    for r in rows {
        w.serialize(r).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_err(e: csv::Error) -> EverestError {
    EverestError::Io(std::io::Error::other(e))
}

#[cfg(test)]
mod tests {
    use std::collections::HashSet;

    use super::*;
    use crate::source::{MatrixSource, SyntheticModel, SyntheticModelSpec};

    fn model(layers: usize) -> MatrixSource {
        SyntheticModel::new(SyntheticModelSpec::new(2, vec![12; layers], 5, 60))
            .unwrap()
            .materialize()
            .unwrap()
    }

    #[test]
    fn single_query_workload() {
        let src = model(4);
        let w = generate(&WorkloadSpec::new(WorkloadKind::W1, 1, 8), &src).unwrap();
        assert_eq!(w.queries.len(), 1);
        assert_eq!(w.queries[0].group.len(), 3);
        assert_eq!(w.queries[0].k, 20);
        // generation never touches the source's own ledger
        assert_eq!(src.ledger().snapshot().inputs_run, 0);
        assert_eq!(w.generation.inputs_run, 1);
    }

    #[test]
    fn seeded_determinism() {
        let src = model(5);
        let spec = WorkloadSpec::new(WorkloadKind::W2, 40, 99);
        assert_eq!(
            generate(&spec, &src).unwrap().queries,
            generate(&spec, &src).unwrap().queries
        );
    }

    #[test]
    fn uniform_layers_within_five_sigma() {
        let src = model(5);
        let w = generate(&WorkloadSpec::new(WorkloadKind::W3, 1000, 1), &src).unwrap();
        let mut counts = [0f64; 5];
        for q in &w.queries {
            counts[q.layer.index()] += 1.0;
        }
        let (p, n): (f64, f64) = (0.2, 1000.0);
        let sigma = (n * p * (1.0 - p)).sqrt();
        for c in counts {
            assert!((c - n * p).abs() < 5.0 * sigma, "{counts:?}");
        }
    }

    #[test]
    fn iqa_sequence_swaps_one_neuron() {
        let src = model(3);
        let kind = WorkloadKind::IqaSeq {
            n_size: 5,
            n_replace: 1,
        };
        let w = generate(&WorkloadSpec::new(kind, 20, 4), &src).unwrap();
        for pair in w.queries.windows(2) {
            let a: HashSet<_> = pair[0].group.iter().collect();
            let b: HashSet<_> = pair[1].group.iter().collect();
            assert_eq!(a.intersection(&b).count(), 4);
            assert_eq!((pair[0].target, pair[0].layer), (pair[1].target, pair[1].layer));
        }
    }

    #[test]
    fn w1_previous_layer_excludes_current() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let visited = [LayerId(0), LayerId(1), LayerId(2)];
        for _ in 0..200 {
            let l = next_layer(&mut rng, LayerId(2), &visited, 3, 0.0, 1.0);
            assert!(l == LayerId(0) || l == LayerId(1));
        }
    }

    #[test]
    fn empty_harness_is_an_empty_table() {
        let rows = run_harness(&[], &mut []).unwrap();
        assert!(rows.is_empty());
        let mut out = Vec::new();
        write_csv(&rows, &mut out).unwrap();
        assert_eq!(
            String::from_utf8(out).unwrap().trim(),
            "queryIdx,strategy,inferenceUnits,bytesRead,bytesStored,cumulativeUnits"
        );
    }
}
