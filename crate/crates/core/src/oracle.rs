//! Ground truth: full-scan top-k, a classic threshold algorithm over sorted
//! difference lists, and the per-neuron access bound that relates the two.

use serde::Serialize;

use crate::distance::QueryMode;
use crate::error::Result;
use crate::nta::{QuerySpec, QueryStats, ResultEntry, TopKResult};
use crate::source::ActivationMatrix;

fn check_shape(spec: &QuerySpec, acts: &ActivationMatrix) -> Result<()> {
    spec.validate(acts.n_inputs(), acts.n_neurons())
}

/// Per-input score components, in group order: `|act - act(s)|` in
/// most-similar mode, the activation clamped at zero in highest mode.
fn components(spec: &QuerySpec, acts: &ActivationMatrix, input: usize, out: &mut [f64]) {
    for (j, &neuron) in spec.group.iter().enumerate() {
        let a = acts.get(input, neuron) as f64;
        out[j] = match spec.mode {
            QueryMode::MostSimilar => (a - acts.get(spec.target as usize, neuron) as f64).abs(),
            QueryMode::Highest => a.max(0.0),
        };
    }
}

fn candidate(spec: &QuerySpec, input: usize) -> bool {
    !(spec.mode == QueryMode::MostSimilar && spec.exclude_target && input == spec.target as usize)
}

/// Exact answer by scoring every input. Ties go to the lower input id.
pub fn brute_force_topk(spec: &QuerySpec, acts: &ActivationMatrix) -> Result<TopKResult> {
    check_shape(spec, acts)?;
    let n = acts.n_inputs();
    let mut comps = vec![0.0; spec.group.len()];
    let mut scored: Vec<(f64, u32)> = (0..n)
        .filter(|&x| candidate(spec, x))
        .map(|x| {
            components(spec, acts, x, &mut comps);
            (spec.distance.aggregate_unchecked(&comps), x as u32)
        })
        .collect();
    match spec.mode {
        QueryMode::MostSimilar => scored.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1))),
        QueryMode::Highest => scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1))),
    }
    let truncated = spec.k > scored.len();
    scored.truncate(spec.k);
    Ok(TopKResult {
        entries: scored
            .into_iter()
            .map(|(distance, input_id)| ResultEntry { input_id, distance })
            .collect(),
        stats: QueryStats {
            inputs_run: n,
            inputs_seen: n,
            rounds_executed: 1,
            per_neuron_depth: vec![n; spec.group.len()],
            final_threshold: match spec.mode {
                QueryMode::MostSimilar => f64::INFINITY,
                QueryMode::Highest => 0.0,
            },
            truncated,
            ..QueryStats::default()
        },
    })
}

/// One list per group neuron: `(input, component)` sorted best first.
#[derive(Clone, Debug, PartialEq)]
pub struct AbsDiffLists {
    mode: QueryMode,
    lists: Vec<Vec<(u32, f64)>>,
    /// `values[j][input]` for random access.
    values: Vec<Vec<f64>>,
}

impl AbsDiffLists {
    pub fn build(spec: &QuerySpec, acts: &ActivationMatrix) -> Result<Self> {
        check_shape(spec, acts)?;
        let g = spec.group.len();
        let n = acts.n_inputs();
        let mut values = vec![vec![0.0; n]; g];
        let mut comps = vec![0.0; g];
        for x in 0..n {
            components(spec, acts, x, &mut comps);
            for (col, &c) in values.iter_mut().zip(&comps) {
                col[x] = c;
            }
        }
        let lists = values
            .iter()
            .map(|col| {
                let mut l: Vec<(u32, f64)> = (0..n)
                    .filter(|&x| candidate(spec, x))
                    .map(|x| (x as u32, col[x]))
                    .collect();
                match spec.mode {
                    QueryMode::MostSimilar => l.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0))),
                    QueryMode::Highest => l.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0))),
                }
                l
            })
            .collect();
        Ok(Self {
            mode: spec.mode,
            lists,
            values,
        })
    }

    pub fn list(&self, j: usize) -> &[(u32, f64)] {
        &self.lists[j]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CtaOutcome {
    pub entries: Vec<ResultEntry>,
    /// Sequential depth reached in each list; lists advance in lockstep.
    pub depths: Vec<usize>,
}

impl CtaOutcome {
    pub fn max_depth(&self) -> usize {
        self.depths.iter().copied().max().unwrap_or(0)
    }
}

/// Classic threshold algorithm: read the lists in lockstep, score every new
/// input by random access and stop once the k-th best is at least as good
/// as the aggregate of the last values read.
pub fn cta_reference(spec: &QuerySpec, lists: &AbsDiffLists, k: usize) -> CtaOutcome {
    let g = lists.lists.len();
    let len = lists.lists.first().map_or(0, Vec::len);
    let k = k.min(len);
    let better = |a: f64, b: f64| match lists.mode {
        QueryMode::MostSimilar => a < b,
        QueryMode::Highest => a > b,
    };
    let n = lists.values.first().map_or(0, Vec::len);
    let mut seen = vec![false; n];
    let mut top: Vec<(f64, u32)> = Vec::new();
    let mut comps = vec![0.0; g];
    let mut depth = 0;
    while depth < len {
        for list in &lists.lists {
            let x = list[depth].0;
            if std::mem::replace(&mut seen[x as usize], true) {
                continue;
            }
            for (j, c) in comps.iter_mut().enumerate() {
                *c = lists.values[j][x as usize];
            }
            let d = spec.distance.aggregate_unchecked(&comps);
            if top.len() < k {
                top.push((d, x));
            } else if let Some(worst) = worst_slot(&top, &better) {
                if better(d, top[worst].0) {
                    top[worst] = (d, x);
                }
            }
        }
        for (j, c) in comps.iter_mut().enumerate() {
            *c = lists.lists[j][depth].1;
        }
        depth += 1;
        let t = spec.distance.aggregate_unchecked(&comps);
        let done = top.len() == k && worst_slot(&top, &better).is_none_or(|w| !better(t, top[w].0));
        if done {
            break;
        }
    }
    match lists.mode {
        QueryMode::MostSimilar => top.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1))),
        QueryMode::Highest => top.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1))),
    }
    CtaOutcome {
        entries: top
            .into_iter()
            .map(|(distance, input_id)| ResultEntry { input_id, distance })
            .collect(),
        depths: vec![depth; g],
    }
}

fn worst_slot(top: &[(f64, u32)], better: &impl Fn(f64, f64) -> bool) -> Option<usize> {
    (0..top.len()).reduce(|w, i| if better(top[w].0, top[i].0) { i } else { w })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct OptimalityReport {
    pub d: usize,
    pub r: usize,
    pub per_neuron_accessed: Vec<usize>,
    pub bound: usize,
    /// `bound - max(per_neuron_accessed)`; negative on a violation.
    pub slack: i64,
    pub pass: bool,
}

/// Checks every neuron's access count against `d + 2R`.
pub fn check_instance_optimality(per_neuron_accessed: &[usize], cta_depths: &[usize], r: usize) -> OptimalityReport {
    let d = cta_depths.iter().copied().max().unwrap_or(0);
    let bound = d + 2 * r;
    let worst = per_neuron_accessed.iter().copied().max().unwrap_or(0);
    OptimalityReport {
        d,
        r,
        per_neuron_accessed: per_neuron_accessed.to_vec(),
        bound,
        slack: bound as i64 - worst as i64,
        pass: worst <= bound,
    }
}

/// `ceil(n_inputs / n_partitions)`, the largest partition of an equi-depth split.
pub fn partition_size(n_inputs: usize, n_partitions: usize) -> usize {
    n_inputs.div_ceil(n_partitions.max(1))
}
