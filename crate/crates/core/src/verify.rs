//! Randomised self-check: every query is answered by the partition index,
//! by a full scan and by the classic threshold algorithm, and the per-neuron
//! access counts are held to the instance-optimality bound.

use std::collections::hash_map::Entry;
use std::collections::HashMap;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::distance::DistanceFn;
use crate::error::Result;
use crate::npi::NeuralPartitionIndex;
use crate::nta::{Executor, QuerySpec};
use crate::oracle::{brute_force_topk, check_instance_optimality, cta_reference, partition_size, AbsDiffLists};
use crate::source::{ActivationMatrix, ActivationSource, LayerId};

#[derive(Clone, Debug, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct VerifyFailure {
    pub query_idx: usize,
    pub spec: QuerySpec,
    pub reason: String,
}

#[derive(Clone, Debug, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct VerifyReport {
    pub queries: usize,
    pub n_partitions: usize,
    pub failures: Vec<VerifyFailure>,
    /// Smallest `bound - accessed` over all queries.
    pub max_slack: Option<i64>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

/// A random query against `source`: mostly most-similar, group of one to four
/// neurons, k up to 20, any unweighted distance.
pub fn random_spec(rng: &mut impl Rng, source: &dyn ActivationSource) -> Result<QuerySpec> {
    let layer = LayerId(rng.gen_range(0..source.layer_count()) as u32);
    let width = source.layer_width(layer)?;
    let g = rng.gen_range(1..=width.min(4));
    let group = sample(rng, width, g).into_vec();
    let n = source.n_inputs();
    let k = rng.gen_range(1..=n.min(20));
    let distance = [DistanceFn::L1, DistanceFn::L2, DistanceFn::Linf][rng.gen_range(0..3)].clone();
    let spec = if rng.gen_bool(0.8) {
        QuerySpec::similar(layer, rng.gen_range(0..n) as u32, group, k)
    } else {
        QuerySpec::highest(layer, group, k)
    };
    Ok(spec.with_distance(distance))
}

/// Full activations of `layer` without charging the inference ledger.
pub fn uncharged_layer(source: &dyn ActivationSource, layer: LayerId) -> Result<ActivationMatrix> {
    let n = source.n_inputs();
    let ids: Vec<u32> = (0..n as u32).collect();
    let mut values = Vec::new();
    source.compute_rows(layer, &ids, &mut values)?;
    ActivationMatrix::new(layer, n, source.layer_width(layer)?, values)
}

fn same_distances(a: &[f64], b: &[f64]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= 1e-9 * x.abs().max(1.0))
}

/// Runs `queries` random queries without the maximum-activation index.
pub fn verify(source: &dyn ActivationSource, queries: usize, seed: u64, n_partitions: usize) -> Result<VerifyReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut layers: HashMap<LayerId, (ActivationMatrix, NeuralPartitionIndex)> = HashMap::new();
    let mut failures = Vec::new();
    let mut max_slack: Option<i64> = None;
    for query_idx in 0..queries {
        let spec = random_spec(&mut rng, source)?;
        let (acts, idx) = match layers.entry(spec.layer) {
            Entry::Occupied(e) => e.into_mut(),
            Entry::Vacant(e) => {
                let acts = uncharged_layer(source, spec.layer)?;
                let idx = NeuralPartitionIndex::build(&acts, n_partitions)?;
                e.insert((acts, idx))
            }
        };
        let (acts, idx) = (&*acts, &*idx);
        let mut fail = |reason: String| {
            failures.push(VerifyFailure {
                query_idx,
                spec: spec.clone(),
                reason,
            })
        };
        let got = Executor::new(source, idx).run(&spec)?;
        let want = brute_force_topk(&spec, acts)?;
        if !same_distances(&got.distances(), &want.distances()) {
            fail(format!(
                "distances {:?}, full scan {:?}",
                got.distances(),
                want.distances()
            ));
            continue;
        }
        let lists = AbsDiffLists::build(&spec, acts)?;
        let cta = cta_reference(&spec, &lists, spec.k);
        let cta_d: Vec<f64> = cta.entries.iter().map(|e| e.distance).collect();
        if !same_distances(&cta_d, &want.distances()) {
            fail(format!(
                "threshold algorithm {cta_d:?}, full scan {:?}",
                want.distances()
            ));
            continue;
        }
        let r = partition_size(source.n_inputs(), n_partitions);
        let report = check_instance_optimality(&got.stats.per_neuron_depth, &cta.depths, r);
        max_slack = Some(max_slack.map_or(report.slack, |s| s.min(report.slack)));
        if !report.pass {
            fail(format!(
                "accessed {:?} exceeds d + 2R = {} + 2*{}",
                report.per_neuron_accessed, report.d, report.r
            ));
        }
    }
    Ok(VerifyReport {
        queries,
        n_partitions,
        failures,
        max_slack,
    })
}
