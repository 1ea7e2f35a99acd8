//! The Neural Threshold Algorithm.
//!
//! Each group neuron visits its partitions in order of their distance to the
//! target's activation. Every round the union of the newly visited members is
//! inferred, the candidate set is updated and a threshold (a lower bound on
//! the distance of anything still unseen) is recomputed from the activation
//! range each neuron has covered so far. The query halts as soon as the worst
//! kept candidate is no farther than the threshold.

mod exec;
mod topk;

use serde::{Deserialize, Serialize};

use crate::distance::{DistanceFn, QueryMode};
use crate::error::{EverestError, Result};
use crate::npi::{NeuralPartitionIndex, PartitionId};
use crate::source::LayerId;

pub use exec::{Executor, RoundEvent};

fn default_k() -> usize {
    20
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct QuerySpec {
    pub layer: LayerId,
    /// Ignored in highest mode.
    #[serde(default)]
    pub target: u32,
    /// Neuron ordinals within `layer`.
    #[serde(alias = "neurons")]
    pub group: Vec<usize>,
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default, alias = "dist")]
    pub distance: DistanceFn,
    #[serde(default)]
    pub mode: QueryMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
    /// Leave the target itself out of the answer. By default it competes like
    /// any other input and ranks first at distance 0.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub exclude_target: bool,
}

impl QuerySpec {
    pub fn similar(layer: LayerId, target: u32, group: Vec<usize>, k: usize) -> Self {
        Self {
            layer,
            target,
            group,
            k,
            distance: DistanceFn::default(),
            mode: QueryMode::MostSimilar,
            theta: None,
            exclude_target: false,
        }
    }

    pub fn highest(layer: LayerId, group: Vec<usize>, k: usize) -> Self {
        Self {
            mode: QueryMode::Highest,
            ..Self::similar(layer, 0, group, k)
        }
    }

    pub fn with_distance(mut self, distance: DistanceFn) -> Self {
        self.distance = distance;
        self
    }

    pub fn with_theta(mut self, theta: f64) -> Self {
        self.theta = Some(theta);
        self
    }

    pub fn excluding_target(mut self) -> Self {
        self.exclude_target = true;
        self
    }

    fn uses_target(&self) -> bool {
        self.mode == QueryMode::MostSimilar
    }

    /// Inputs that may appear in the answer.
    pub fn candidate_count(&self, n_inputs: usize) -> usize {
        if self.uses_target() && self.exclude_target {
            n_inputs.saturating_sub(1)
        } else {
            n_inputs
        }
    }

    pub fn validate(&self, n_inputs: usize, layer_width: usize) -> Result<()> {
        let bad = |m: String| Err(EverestError::InvalidQuery(m));
        if self.group.is_empty() {
            return bad("neuron group is empty".into());
        }
        let mut sorted = self.group.clone();
        sorted.sort_unstable();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return bad("neuron group has duplicates".into());
        }
        if let Some(&n) = sorted.last().filter(|&&n| n >= layer_width) {
            return bad(format!(
                "neuron {n} outside layer {} of width {layer_width}",
                self.layer
            ));
        }
        if self.k == 0 {
            return bad("k must be at least 1".into());
        }
        if let Some(theta) = self.theta {
            if !(theta > 0.0 && theta <= 1.0) {
                return bad(format!("theta must be in (0, 1], got {theta}"));
            }
        }
        if self.uses_target() && self.target as usize >= n_inputs {
            return bad(format!("target {} outside 0..{n_inputs}", self.target));
        }
        self.distance.validate_for_group(self.group.len())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ResultEntry {
    pub input_id: u32,
    /// Distance to the target, or the activation score in highest mode.
    pub distance: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct QueryStats {
    /// Inputs actually sent to the activation source.
    pub inputs_run: usize,
    /// Inputs whose activations were obtained, from the source or the cache.
    pub inputs_seen: usize,
    pub cache_hits: usize,
    pub rounds_executed: usize,
    /// Inputs delivered through each group neuron's partition stream.
    pub per_neuron_depth: Vec<usize>,
    #[serde(with = "inf_as_null")]
    pub final_threshold: f64,
    #[serde(with = "inf_as_null::many")]
    pub threshold_trace: Vec<f64>,
    pub theta_achieved: Option<f64>,
    pub stopped_early: bool,
    /// `k` exceeded the number of candidates.
    pub truncated: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TopKResult {
    pub entries: Vec<ResultEntry>,
    pub stats: QueryStats,
}

impl TopKResult {
    pub fn ids(&self) -> Vec<u32> {
        self.entries.iter().map(|e| e.input_id).collect()
    }

    pub fn distances(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.distance).collect()
    }
}

/// JSON has no infinity; an unbounded threshold travels as `null`.
pub(crate) mod inf_as_null {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }

    pub mod many {
        use serde::ser::SerializeSeq;
        use serde::{Deserialize, Deserializer, Serializer};

        pub fn serialize<S: Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
            let mut seq = s.serialize_seq(Some(v.len()))?;
            for x in v {
                seq.serialize_element(&x.is_finite().then_some(*x))?;
            }
            seq.end()
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
            let v = Vec::<Option<f64>>::deserialize(d)?;
            Ok(v.into_iter().map(|x| x.unwrap_or(f64::INFINITY)).collect())
        }
    }
}

/// Distance from `target_act` to the closest value each partition of
/// `neuron` can hold.
pub fn compute_dpar(
    idx: &NeuralPartitionIndex,
    neuron: usize,
    s_pid: PartitionId,
    target_act: f64,
) -> Result<Vec<f64>> {
    (0..idx.n_partitions() as u32)
        .map(|p| {
            let (lo, hi) = idx.bounds(neuron, PartitionId(p))?;
            let d = match p.cmp(&s_pid.0) {
                std::cmp::Ordering::Equal => 0.0,
                std::cmp::Ordering::Less => lo as f64 - target_act,
                std::cmp::Ordering::Greater => target_act - hi as f64,
            };
            Ok(d.max(0.0))
        })
        .collect()
}

/// Partition visit order: ascending `dpar`, then nearer to `s_pid`, then lower id.
pub fn order_partitions(dpar: &[f64], s_pid: PartitionId) -> Vec<u32> {
    let mut ord: Vec<u32> = (0..dpar.len() as u32).collect();
    ord.sort_by(|&a, &b| {
        dpar[a as usize]
            .total_cmp(&dpar[b as usize])
            .then(a.abs_diff(s_pid.0).cmp(&b.abs_diff(s_pid.0)))
            .then(a.cmp(&b))
    });
    ord
}

#[cfg(test)]
mod tests {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::demo;
    use crate::source::ActivationMatrix;

    #[test]
    fn dpar_zero_at_target_partition_and_single_partition() {
        let acts = demo::partition_example();
        let idx = NeuralPartitionIndex::build_compat(&acts, 3).unwrap();
        for neuron in 0..3 {
            let s = acts.get(5, neuron) as f64;
            let pid = idx.get_pid(neuron, 5).unwrap();
            let d = compute_dpar(&idx, neuron, pid, s).unwrap();
            assert_eq!(d[pid.0 as usize], 0.0);
        }
        let one = NeuralPartitionIndex::build(&acts, 1).unwrap();
        assert_eq!(compute_dpar(&one, 0, PartitionId(0), 1.1).unwrap(), [0.0]);
    }

    #[test]
    fn worked_example_orders() {
        let acts = demo::partition_example();
        let idx = NeuralPartitionIndex::build_compat(&acts, 3).unwrap();
        let ords: Vec<Vec<u32>> = (0..3)
            .map(|n| {
                let pid = idx.get_pid(n, 5).unwrap();
                let d = compute_dpar(&idx, n, pid, acts.get(5, n) as f64).unwrap();
                order_partitions(&d, pid)
            })
            .collect();
        assert_eq!(ords, [vec![2, 1, 0], vec![1, 2, 0], vec![2, 1, 0]]);
    }

    #[test]
    fn equal_dpar_falls_back_to_nearness_then_id() {
        assert_eq!(order_partitions(&[0.0; 5], PartitionId(2)), [2, 1, 3, 0, 4]);
    }

    #[test]
    fn dpar_matches_brute_force_minimum_outside_target_partition() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let (n, m) = (64, 4);
        let v: Vec<f32> = (0..n * m).map(|_| rng.gen_range(0..40) as f32 * 0.25).collect();
        let acts = ActivationMatrix::new(LayerId(0), n, m, v).unwrap();
        let idx = NeuralPartitionIndex::build(&acts, 8).unwrap();
        for trial in 0..20 {
            let s = (trial * 3) as u32 % n as u32;
            for neuron in 0..m {
                let target = acts.get(s as usize, neuron) as f64;
                let pid = idx.get_pid(neuron, s).unwrap();
                let d = compute_dpar(&idx, neuron, pid, target).unwrap();
                let ord = order_partitions(&d, pid);
                assert_eq!(ord[0], pid.0);
                assert!(ord.windows(2).all(|w| d[w[0] as usize] <= d[w[1] as usize]));
                for p in 0..8u32 {
                    let members = idx.get_input_ids(neuron, PartitionId(p)).unwrap();
                    let best = members
                        .iter()
                        .map(|&x| (acts.get(x as usize, neuron) as f64 - target).abs())
                        .fold(f64::INFINITY, f64::min);
                    if p == pid.0 {
                        assert_eq!(best, 0.0);
                    } else {
                        assert!((d[p as usize] - best).abs() < 1e-12, "p={p}");
                    }
                }
            }
        }
    }

    #[test]
    fn spec_validation() {
        let ok = QuerySpec::similar(LayerId(0), 1, vec![0, 2], 3);
        assert!(ok.validate(10, 4).is_ok());
        for bad in [
            QuerySpec::similar(LayerId(0), 1, vec![], 3),
            QuerySpec::similar(LayerId(0), 1, vec![1, 1], 3),
            QuerySpec::similar(LayerId(0), 1, vec![4], 3),
            QuerySpec::similar(LayerId(0), 1, vec![0], 0),
            QuerySpec::similar(LayerId(0), 10, vec![0], 3),
            QuerySpec::similar(LayerId(0), 1, vec![0], 3).with_theta(1.5),
        ] {
            assert!(
                matches!(bad.validate(10, 4), Err(EverestError::InvalidQuery(_))),
                "{bad:?}"
            );
        }
        // the target is irrelevant when ranking by activation
        assert!(QuerySpec::highest(LayerId(0), vec![3], 2).validate(0, 4).is_ok());
    }

    #[test]
    fn spec_json_accepts_neurons_alias_and_defaults() {
        let spec: QuerySpec = serde_json::from_str(r#"{"layer":2,"target":5,"neurons":[3,1],"dist":"l1"}"#).unwrap();
        assert_eq!(spec.group, [3, 1]);
        assert_eq!(spec.k, 20);
        assert_eq!(spec.distance, DistanceFn::L1);
        assert_eq!(spec.mode, QueryMode::MostSimilar);
        let spec: QuerySpec =
            serde_json::from_str(r#"{"layer":0,"group":[0],"k":2,"distance":"l1","mode":"highest"}"#).unwrap();
        assert_eq!(spec.distance, DistanceFn::L1);
        assert_eq!(spec.mode, QueryMode::Highest);
    }

    #[test]
    fn infinite_threshold_serializes_as_null() {
        let stats = QueryStats {
            final_threshold: f64::INFINITY,
            threshold_trace: vec![0.5, f64::INFINITY],
            ..QueryStats::default()
        };
        let json = serde_json::to_value(&stats).unwrap();
        assert!(json["finalThreshold"].is_null());
        assert_eq!(json["thresholdTrace"], serde_json::json!([0.5, null]));
        let back: QueryStats = serde_json::from_value(json).unwrap();
        assert_eq!(back, stats);
    }
}
