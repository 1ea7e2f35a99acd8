use std::collections::HashMap;
use std::sync::atomic::{AtomicBool, Ordering};

use serde::Serialize;

use super::topk::TopK;
use super::{compute_dpar, order_partitions, QuerySpec, QueryStats, ResultEntry, TopKResult};
use crate::distance::QueryMode;
use crate::error::{EverestError, Result};
use crate::iqa::ActivationCache;
use crate::mai::MaximumActivationIndex;
use crate::npi::{NeuralPartitionIndex, PartitionId};
use crate::source::ActivationSource;

const NO_SLOT: u32 = u32::MAX;

/// Emitted after every round.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RoundEvent {
    pub round: usize,
    #[serde(with = "super::inf_as_null")]
    pub threshold: f64,
    /// Entries confirmed this round: no unseen input can displace them.
    pub confirmed: Vec<ResultEntry>,
    /// Guarantee if the query stopped now, when the candidate set is full.
    pub theta: Option<f64>,
}

/// Runs queries against one layer's partition index.
///
/// ```no_run
/// # use everest::{demo, nta::{Executor, QuerySpec}, npi::NeuralPartitionIndex, source::{LayerId, MatrixSource}};
/// let acts = demo::partition_example();
/// let idx = NeuralPartitionIndex::build_compat(&acts, 3).unwrap();
/// let src = MatrixSource::new(vec![acts]).unwrap();
/// let spec = QuerySpec::similar(LayerId(0), 5, vec![0, 1, 2], 2);
/// let result = Executor::new(&src, &idx).run(&spec).unwrap();
/// ```
pub struct Executor<'a> {
    source: &'a dyn ActivationSource,
    npi: &'a NeuralPartitionIndex,
    mai: Option<&'a MaximumActivationIndex>,
    cache: Option<&'a mut ActivationCache>,
    batch_size: usize,
    stop: Option<&'a AtomicBool>,
    observer: Option<&'a mut dyn FnMut(&RoundEvent)>,
}

/// Per-neuron cursor over the partition visit order.
struct Stream {
    ord: Vec<u32>,
    members: Vec<Vec<u32>>,
    cursor: usize,
    min_b: f64,
    max_b: f64,
    seen_first: bool,
    seen_last: bool,
}

/// Per-neuron cursor over maximum-activation entries, sorted by `key`.
struct MaiStream {
    pos: usize,
    entries: Vec<(f64, u32, f32)>,
    cursor: usize,
    top_input: u32,
    seen_top: bool,
    min_b: f64,
    max_b: f64,
}

struct State<'q> {
    spec: &'q QuerySpec,
    g: usize,
    slot: Vec<u32>,
    acts: Vec<f32>,
    seen: Vec<bool>,
    n_seen: usize,
    target: Vec<f64>,
    top: TopK,
    emitted: Vec<bool>,
    comps: Vec<f64>,
    stats: QueryStats,
}

impl State<'_> {
    fn act(&self, input: u32, j: usize) -> f32 {
        self.acts[self.slot[input as usize] as usize * self.g + j]
    }

    fn store(&mut self, input: u32, row: &[f32]) {
        self.slot[input as usize] = (self.acts.len() / self.g) as u32;
        for &neuron in &self.spec.group {
            self.acts.push(row[neuron]);
        }
    }

    fn mark(&mut self, input: u32) -> bool {
        let fresh = !self.seen[input as usize];
        if fresh {
            self.seen[input as usize] = true;
            self.n_seen += 1;
        }
        fresh
    }

    fn similar(&self) -> bool {
        self.spec.mode == QueryMode::MostSimilar
    }

    /// Smaller is better in both modes: highest mode negates the score.
    fn key(&mut self, input: u32) -> f64 {
        for j in 0..self.g {
            let a = self.act(input, j) as f64;
            self.comps[j] = if self.similar() {
                (a - self.target[j]).abs()
            } else {
                a.max(0.0)
            };
        }
        let d = self.spec.distance.aggregate_unchecked(&self.comps);
        if self.similar() {
            d
        } else {
            -d
        }
    }

    fn offer(&mut self, input: u32) {
        if self.similar() && self.spec.exclude_target && input == self.spec.target {
            return;
        }
        let key = self.key(input);
        self.top.offer(input, key);
    }

    fn bound_key(&self, t: f64) -> f64 {
        if self.similar() {
            t
        } else {
            -t
        }
    }

    fn halt(&self, t: f64) -> bool {
        if !self.top.is_full() {
            return false;
        }
        let theta = self.spec.theta.unwrap_or(1.0);
        let bound = if self.similar() { t / theta } else { -(theta * t) };
        self.top.worst_key().is_none_or(|w| w <= bound)
    }

    fn theta_now(&self, t: f64) -> Option<f64> {
        if !self.top.is_full() {
            return None;
        }
        let Some(worst) = self.top.worst_key() else {
            return Some(1.0);
        };
        let theta = if self.similar() {
            if worst <= 0.0 || t >= worst {
                1.0
            } else {
                t / worst
            }
        } else {
            let b = -worst;
            if t <= 0.0 || b >= t {
                1.0
            } else {
                b / t
            }
        };
        Some(theta)
    }

    fn entry(&self, key: f64, input: u32) -> ResultEntry {
        ResultEntry {
            input_id: input,
            distance: if self.similar() { key } else { -key },
        }
    }
}

impl<'a> Executor<'a> {
    pub fn new(source: &'a dyn ActivationSource, npi: &'a NeuralPartitionIndex) -> Self {
        Self {
            source,
            npi,
            mai: None,
            cache: None,
            batch_size: 64,
            stop: None,
            observer: None,
        }
    }

    /// Uses `mai` as partition 0. The index must have been built with a head
    /// partition of the same size.
    pub fn mai(mut self, mai: Option<&'a MaximumActivationIndex>) -> Self {
        self.mai = mai.filter(|m| !m.is_empty());
        self
    }

    pub fn cache(mut self, cache: &'a mut ActivationCache) -> Self {
        self.cache = Some(cache);
        self
    }

    pub fn batch_size(mut self, batch_size: usize) -> Self {
        self.batch_size = batch_size;
        self
    }

    /// Checked between rounds; once set the query returns its current answer.
    pub fn stop_signal(mut self, stop: &'a AtomicBool) -> Self {
        self.stop = Some(stop);
        self
    }

    pub fn on_round(mut self, observer: &'a mut dyn FnMut(&RoundEvent)) -> Self {
        self.observer = Some(observer);
        self
    }

    fn stopped(&self) -> bool {
        self.stop.is_some_and(|s| s.load(Ordering::Relaxed))
    }

    fn check(&self, spec: &QuerySpec) -> Result<()> {
        if self.batch_size == 0 {
            return Err(EverestError::Config("batch size must be at least 1".into()));
        }
        let n = self.source.n_inputs();
        let width = self.source.layer_width(spec.layer)?;
        spec.validate(n, width)?;
        let npi = self.npi;
        if npi.layer() != spec.layer || npi.n_inputs() != n || npi.n_neurons() != width {
            return Err(EverestError::InvalidQuery(format!(
                "index covers {} ({} x {}), query needs {} ({n} x {width})",
                npi.layer(),
                npi.n_inputs(),
                npi.n_neurons(),
                spec.layer
            )));
        }
        if let Some(mai) = self.mai {
            if mai.layer() != spec.layer || mai.n_neurons() != width {
                return Err(EverestError::InvalidQuery(format!(
                    "maximum-activation index covers {}, query needs {}",
                    mai.layer(),
                    spec.layer
                )));
            }
        }
        Ok(())
    }

    pub fn run(&mut self, spec: &QuerySpec) -> Result<TopKResult> {
        self.check(spec)?;
        let n = self.source.n_inputs();
        let g = spec.group.len();
        let mut st = State {
            spec,
            g,
            slot: vec![NO_SLOT; n],
            acts: Vec::new(),
            seen: vec![false; n],
            n_seen: 0,
            target: vec![0.0; g],
            top: TopK::new(spec.k.min(spec.candidate_count(n))),
            emitted: vec![false; n],
            comps: vec![0.0; g],
            stats: QueryStats {
                per_neuron_depth: vec![0; g],
                final_threshold: if spec.mode == QueryMode::MostSimilar {
                    0.0
                } else {
                    f64::INFINITY
                },
                truncated: spec.k > spec.candidate_count(n),
                ..QueryStats::default()
            },
        };

        let mut members: Vec<Vec<Vec<u32>>> = Vec::with_capacity(g);
        for &neuron in &spec.group {
            members.push(self.npi.partition_members(neuron)?);
        }
        if let Some(mai) = self.mai {
            // partition 0 must be exactly the stored entries
            for (j, &neuron) in spec.group.iter().enumerate() {
                let mut head: Vec<u32> = mai.entries(neuron)?.iter().map(|e| e.input).collect();
                head.sort_unstable();
                if head != members[j][0] {
                    return Err(EverestError::Config(format!(
                        "partition 0 of neuron {neuron} does not match the maximum-activation index"
                    )));
                }
            }
        }

        match spec.mode {
            QueryMode::MostSimilar => self.run_similar(&mut st, members)?,
            QueryMode::Highest => self.run_highest(&mut st, members)?,
        }
        Ok(self.finish(st))
    }

    fn fetch(&mut self, st: &mut State, ids: &[u32]) -> Result<()> {
        if ids.is_empty() {
            return Ok(());
        }
        let layer = st.spec.layer;
        let (hits, misses) = match self.cache.as_deref_mut() {
            Some(cache) => cache.lookup(layer, ids),
            None => (HashMap::new(), ids.to_vec()),
        };
        for &id in ids {
            if let Some(row) = hits.get(&id) {
                st.store(id, row);
            }
        }
        st.stats.cache_hits += hits.len();
        if !misses.is_empty() {
            let rows = self.source.infer_layer(layer, &misses, self.batch_size)?;
            for (r, &id) in misses.iter().enumerate() {
                st.store(id, rows.row(r));
                if let Some(cache) = self.cache.as_deref_mut() {
                    cache.insert(layer, id, rows.row(r).to_vec());
                }
            }
            st.stats.inputs_run += misses.len();
        }
        Ok(())
    }

    /// Infers `batch` (already marked seen) and offers every member.
    fn process(&mut self, st: &mut State, batch: &[u32]) -> Result<()> {
        self.fetch(st, batch)?;
        for &x in batch {
            st.offer(x);
        }
        Ok(())
    }

    fn end_round(&mut self, st: &mut State, t: f64) {
        st.stats.rounds_executed += 1;
        st.stats.threshold_trace.push(t);
        st.stats.final_threshold = t;
        let bound = st.bound_key(t);
        let mut confirmed = Vec::new();
        for r in st.top.sorted() {
            if r.key <= bound && !st.emitted[r.input as usize] {
                st.emitted[r.input as usize] = true;
                confirmed.push(st.entry(r.key, r.input));
            }
        }
        let event = RoundEvent {
            round: st.stats.rounds_executed - 1,
            threshold: t,
            confirmed,
            theta: st.theta_now(t),
        };
        if let Some(observer) = self.observer.as_deref_mut() {
            observer(&event);
        }
    }

    fn run_similar(&mut self, st: &mut State, members: Vec<Vec<Vec<u32>>>) -> Result<()> {
        let s = st.spec.target;
        st.mark(s);
        self.fetch(st, &[s])?;
        for j in 0..st.g {
            st.target[j] = st.act(s, j) as f64;
        }
        st.offer(s);

        let mut streams = Vec::with_capacity(st.g);
        for (j, m) in members.into_iter().enumerate() {
            let neuron = st.spec.group[j];
            let s_pid = self.npi.get_pid(neuron, s)?;
            let dpar = compute_dpar(self.npi, neuron, s_pid, st.target[j])?;
            streams.push(Stream {
                ord: order_partitions(&dpar, s_pid),
                members: m,
                cursor: 0,
                min_b: f64::INFINITY,
                max_b: f64::NEG_INFINITY,
                seen_first: false,
                seen_last: false,
            });
        }

        if let Some(mai) = self.mai {
            let mut heads = Vec::new();
            for (j, &neuron) in st.spec.group.iter().enumerate() {
                let list = mai.entries(neuron)?;
                if !list.iter().any(|e| e.input == s) {
                    continue;
                }
                let t = st.target[j];
                let mut entries: Vec<(f64, u32, f32)> = list
                    .iter()
                    .filter(|e| e.input != s)
                    .map(|e| ((e.activation as f64 - t).abs(), e.input, e.activation))
                    .collect();
                entries.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
                heads.push(MaiStream {
                    pos: j,
                    entries,
                    cursor: 0,
                    top_input: list[0].input,
                    seen_top: list[0].input == s,
                    min_b: t,
                    max_b: t,
                });
                // the target itself came through this stream
                st.stats.per_neuron_depth[j] = 1;
            }
            if !heads.is_empty() {
                if self.mai_phase(st, &mut heads)? {
                    return Ok(());
                }
                let last = self.npi.n_partitions() - 1;
                for h in heads {
                    let stream = &mut streams[h.pos];
                    debug_assert_eq!(stream.ord[0], 0);
                    stream.cursor = 1;
                    stream.min_b = h.min_b;
                    stream.max_b = h.max_b;
                    stream.seen_first = true;
                    stream.seen_last = last == 0;
                }
            }
        }

        let last = self.npi.n_partitions() as u32 - 1;
        loop {
            if self.stopped() {
                st.stats.stopped_early = true;
                return Ok(());
            }
            if streams.iter().any(|s| s.cursor >= s.ord.len()) {
                // every input has been seen
                st.stats.final_threshold = f64::INFINITY;
                return Ok(());
            }
            let mut batch = Vec::new();
            for s in &streams {
                for &x in &s.members[s.ord[s.cursor] as usize] {
                    if st.mark(x) {
                        batch.push(x);
                    }
                }
            }
            self.process(st, &batch)?;
            for (j, s) in streams.iter_mut().enumerate() {
                let p = s.ord[s.cursor];
                let part = &s.members[p as usize];
                for &x in part {
                    let a = st.act(x, j) as f64;
                    s.min_b = s.min_b.min(a);
                    s.max_b = s.max_b.max(a);
                }
                st.stats.per_neuron_depth[j] += part.len();
                s.seen_first |= p == 0;
                s.seen_last |= p == last;
                s.cursor += 1;
                let below = if s.seen_last {
                    f64::INFINITY
                } else {
                    (s.min_b - st.target[j]).abs()
                };
                let above = if s.seen_first {
                    f64::INFINITY
                } else {
                    (s.max_b - st.target[j]).abs()
                };
                st.comps[j] = below.min(above);
            }
            let t = st.spec.distance.aggregate_unchecked(&st.comps);
            self.end_round(st, t);
            if st.halt(t) {
                return Ok(());
            }
        }
    }

    /// Most-similar batches drawn from the maximum-activation entries.
    /// Returns true when the query finished inside this phase.
    fn mai_phase(&mut self, st: &mut State, heads: &mut [MaiStream]) -> Result<bool> {
        loop {
            if self.stopped() {
                st.stats.stopped_early = true;
                return Ok(true);
            }
            let batch = pick_batch(st, heads, self.batch_size);
            if batch.is_empty() {
                return Ok(false);
            }
            self.process(st, &batch)?;
            for h in heads.iter_mut() {
                while let Some(&(_, x, a)) = h.entries.get(h.cursor).filter(|e| st.seen[e.1 as usize]) {
                    h.min_b = h.min_b.min(a as f64);
                    h.max_b = h.max_b.max(a as f64);
                    h.seen_top |= x == h.top_input;
                    h.cursor += 1;
                    st.stats.per_neuron_depth[h.pos] += 1;
                }
            }
            st.comps.iter_mut().for_each(|c| *c = 0.0);
            for h in heads.iter() {
                let t = st.target[h.pos];
                let above = if h.seen_top { f64::INFINITY } else { (h.max_b - t).abs() };
                st.comps[h.pos] = (h.min_b - t).abs().min(above);
            }
            let t = st.spec.distance.aggregate_unchecked(&st.comps);
            self.end_round(st, t);
            if st.halt(t) {
                return Ok(true);
            }
        }
    }

    fn run_highest(&mut self, st: &mut State, members: Vec<Vec<Vec<u32>>>) -> Result<()> {
        let n_parts = self.npi.n_partitions();
        let mut cursor = 0;

        if let Some(mai) = self.mai {
            let mut heads = Vec::with_capacity(st.g);
            for (j, &neuron) in st.spec.group.iter().enumerate() {
                let entries = mai
                    .entries(neuron)?
                    .iter()
                    .map(|e| (-(e.activation as f64), e.input, e.activation))
                    .collect::<Vec<_>>();
                heads.push(MaiStream {
                    pos: j,
                    top_input: entries[0].1,
                    entries,
                    cursor: 0,
                    seen_top: false,
                    min_b: 0.0,
                    max_b: 0.0,
                });
            }
            loop {
                if self.stopped() {
                    st.stats.stopped_early = true;
                    return Ok(());
                }
                let batch = pick_batch(st, &mut heads, self.batch_size);
                if batch.is_empty() {
                    break;
                }
                self.process(st, &batch)?;
                for (j, h) in heads.iter_mut().enumerate() {
                    while h.entries.get(h.cursor).is_some_and(|e| st.seen[e.1 as usize]) {
                        h.cursor += 1;
                        st.stats.per_neuron_depth[j] += 1;
                    }
                    let next = match h.entries.get(h.cursor) {
                        Some(e) => e.2 as f64,
                        None if n_parts > 1 => self.npi.bounds(st.spec.group[j], PartitionId(1))?.1 as f64,
                        None => 0.0,
                    };
                    st.comps[j] = next.max(0.0);
                }
                let t = st.spec.distance.aggregate_unchecked(&st.comps);
                self.end_round(st, t);
                if st.halt(t) {
                    return Ok(());
                }
            }
            cursor = 1;
        }

        loop {
            if self.stopped() {
                st.stats.stopped_early = true;
                return Ok(());
            }
            if cursor >= n_parts {
                st.stats.final_threshold = 0.0;
                return Ok(());
            }
            let mut batch = Vec::new();
            for m in &members {
                for &x in &m[cursor] {
                    if st.mark(x) {
                        batch.push(x);
                    }
                }
            }
            self.process(st, &batch)?;
            for (j, m) in members.iter().enumerate() {
                st.stats.per_neuron_depth[j] += m[cursor].len();
                st.comps[j] = if cursor + 1 < n_parts {
                    (self.npi.bounds(st.spec.group[j], PartitionId(cursor as u32 + 1))?.1 as f64).max(0.0)
                } else {
                    0.0
                };
            }
            cursor += 1;
            let t = st.spec.distance.aggregate_unchecked(&st.comps);
            self.end_round(st, t);
            if st.halt(t) {
                return Ok(());
            }
        }
    }

    fn finish(&self, mut st: State) -> TopKResult {
        let entries: Vec<ResultEntry> = st.top.sorted().iter().map(|r| st.entry(r.key, r.input)).collect();
        st.stats.inputs_seen = st.n_seen;
        if st.stats.stopped_early || st.spec.theta.is_some() {
            st.stats.theta_achieved = st.theta_now(st.stats.final_threshold);
        }
        TopKResult {
            entries,
            stats: st.stats,
        }
    }
}

/// Fills one batch with the best unseen entries across `heads`, marking them seen.
fn pick_batch(st: &mut State, heads: &mut [MaiStream], batch_size: usize) -> Vec<u32> {
    let mut ptr: Vec<usize> = heads.iter().map(|h| h.cursor).collect();
    let mut batch = Vec::new();
    while batch.len() < batch_size {
        let mut best: Option<(f64, usize)> = None;
        for (h, p) in heads.iter().zip(ptr.iter_mut()) {
            while h.entries.get(*p).is_some_and(|e| st.seen[e.1 as usize]) {
                *p += 1;
            }
        }
        for (i, (h, &p)) in heads.iter().zip(&ptr).enumerate() {
            if let Some(e) = h.entries.get(p) {
                if best.is_none_or(|(k, _)| e.0 < k) {
                    best = Some((e.0, i));
                }
            }
        }
        let Some((_, i)) = best else { break };
        let x = heads[i].entries[ptr[i]].1;
        st.mark(x);
        batch.push(x);
    }
    batch
}
