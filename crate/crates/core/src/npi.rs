//! Neural Partition Index.
//!
//! For each neuron the inputs are sorted by activation (descending, ties by
//! ascending input ID) and cut into equi-depth partitions; partition 0 holds
//! the largest activations. The index stores only the partition ID of every
//! `(neuron, input)` cell, bit-packed with `log2(nPartitions)` bits, plus the
//! lower and upper activation bound of every partition.
//!
//! When built together with a maximum-activation index of `m` entries,
//! partition 0 is exactly those `m` inputs and the remaining inputs are cut
//! into partitions `1..nPartitions` with the same equi-depth rule.
//!
//! File layout, little-endian:
//!
//! ```text
//! "NPI1" | version u32 | layerId u32 | nInputs u32 | nNeurons u32 | nPartitions u32
//! | bitsPerPid u8 | pad [u8; 3]
//! | packed PID rows, one per neuron, each padded to a byte boundary, LSB first
//! | lowerBound f32[nNeurons * nPartitions] | upperBound f32[nNeurons * nPartitions]
//! ```

use std::cmp::Ordering;

use crate::codec::{put_f32s, put_u32, to_u32, ByteReader};
use crate::error::{EverestError, Result};
use crate::source::{ActivationMatrix, LayerId};

const MAGIC: &[u8; 4] = b"NPI1";
const VERSION: u32 = 1;
/// Bits per PID in compatibility mode (non-power-of-two partition counts).
const COMPAT_BITS: u8 = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PartitionId(pub u32);

/// Row-per-neuron array of fixed-width unsigned integers.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PackedPids {
    bits: u8,
    row_bytes: usize,
    data: Vec<u8>,
}

impl PackedPids {
    pub fn new(rows: usize, cols: usize, bits: u8) -> Self {
        assert!(bits <= 32);
        let row_bytes = (cols * bits as usize).div_ceil(8);
        Self {
            bits,
            row_bytes,
            data: vec![0; rows * row_bytes],
        }
    }

    pub fn bits(&self) -> u8 {
        self.bits
    }

    pub fn row_bytes(&self) -> usize {
        self.row_bytes
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.data
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> u32 {
        if self.bits == 0 {
            return 0;
        }
        let bit = col * self.bits as usize;
        let start = row * self.row_bytes + bit / 8;
        let shift = bit % 8;
        let span = (shift + self.bits as usize).div_ceil(8);
        let mut word = 0u64;
        for (i, b) in self.data[start..start + span].iter().enumerate() {
            word |= (*b as u64) << (8 * i);
        }
        ((word >> shift) & ((1u64 << self.bits) - 1)) as u32
    }

    pub fn set(&mut self, row: usize, col: usize, value: u32) {
        if self.bits == 0 {
            debug_assert_eq!(value, 0);
            return;
        }
        debug_assert!((value as u64) < (1u64 << self.bits));
        let bit = col * self.bits as usize;
        let start = row * self.row_bytes + bit / 8;
        let shift = bit % 8;
        let span = (shift + self.bits as usize).div_ceil(8);
        let mask = ((1u64 << self.bits) - 1) << shift;
        let bytes = &mut self.data[start..start + span];
        let mut word = 0u64;
        for (i, b) in bytes.iter().enumerate() {
            word |= (*b as u64) << (8 * i);
        }
        word = (word & !mask) | ((value as u64) << shift);
        for (i, b) in bytes.iter_mut().enumerate() {
            *b = (word >> (8 * i)) as u8;
        }
    }
}

/// Per-neuron equi-depth partition index over one layer.
#[derive(Clone, Debug, PartialEq)]
pub struct NeuralPartitionIndex {
    layer: LayerId,
    n_inputs: usize,
    n_neurons: usize,
    n_partitions: usize,
    pids: PackedPids,
    lower: Vec<f32>,
    upper: Vec<f32>,
}

/// Descending by activation, ties by ascending input ID.
pub(crate) fn descending_order(values: &[f32]) -> Vec<u32> {
    let mut order: Vec<u32> = (0..values.len() as u32).collect();
    order.sort_by(|&a, &b| values[b as usize].total_cmp(&values[a as usize]).then(a.cmp(&b)));
    order
}

/// Sizes of `parts` equi-depth blocks over `n` items; the first `n % parts`
/// blocks get one extra item.
pub(crate) fn block_sizes(n: usize, parts: usize) -> impl Iterator<Item = usize> {
    let base = n / parts;
    let extra = n % parts;
    (0..parts).map(move |p| base + usize::from(p < extra))
}

impl NeuralPartitionIndex {
    /// Builds the index with a power-of-two partition count.
    pub fn build(acts: &ActivationMatrix, n_partitions: usize) -> Result<Self> {
        if !n_partitions.is_power_of_two() {
            return Err(EverestError::Config(format!(
                "nPartitions must be a power of two, got {n_partitions}"
            )));
        }
        Self::build_inner(acts, n_partitions, 0, false)
    }

    /// Builds with any partition count in `1..=256`, storing one byte per
    /// PID. Exists to replay small hand-made examples.
    pub fn build_compat(acts: &ActivationMatrix, n_partitions: usize) -> Result<Self> {
        Self::build_inner(acts, n_partitions, 0, true)
    }

    /// Builds with partition 0 fixed to the top `head` inputs of every neuron
    /// (the maximum-activation entries) and the rest split into
    /// `n_partitions - 1` equi-depth partitions.
    pub fn build_with_head(acts: &ActivationMatrix, n_partitions: usize, head: usize) -> Result<Self> {
        let compat = !n_partitions.is_power_of_two();
        Self::build_inner(acts, n_partitions, head, compat)
    }

    pub(crate) fn build_inner(acts: &ActivationMatrix, n_partitions: usize, head: usize, compat: bool) -> Result<Self> {
        let n_inputs = acts.n_inputs();
        let n_neurons = acts.n_neurons();
        if n_partitions == 0 || (head == 0 && n_partitions > n_inputs) {
            return Err(EverestError::Config(format!(
                "nPartitions must be in 1..={n_inputs}, got {n_partitions}"
            )));
        }
        if head > n_inputs {
            return Err(EverestError::Config(format!(
                "partition-0 size {head} exceeds {n_inputs} inputs"
            )));
        }
        if head > 0 && head < n_inputs && n_partitions < 2 {
            return Err(EverestError::Config(
                "a fixed partition 0 needs at least two partitions".into(),
            ));
        }
        let bits = if compat {
            if n_partitions > 256 {
                return Err(EverestError::Config(format!(
                    "compatibility mode supports at most 256 partitions, got {n_partitions}"
                )));
            }
            COMPAT_BITS
        } else if n_partitions.is_power_of_two() {
            n_partitions.trailing_zeros() as u8
        } else {
            return Err(EverestError::Config(format!(
                "nPartitions must be a power of two, got {n_partitions}"
            )));
        };

        let mut pids = PackedPids::new(n_neurons, n_inputs, bits);
        let mut lower = vec![0.0f32; n_neurons * n_partitions];
        let mut upper = vec![0.0f32; n_neurons * n_partitions];
        let sizes: Vec<usize> = if n_partitions == 1 {
            vec![n_inputs]
        } else if head > 0 {
            std::iter::once(head)
                .chain(block_sizes(n_inputs - head, n_partitions - 1))
                .collect()
        } else {
            block_sizes(n_inputs, n_partitions).collect()
        };

        for neuron in 0..n_neurons {
            let column = acts.column(neuron);
            let order = descending_order(&column);
            let mut start = 0;
            let mut carry = column[order[0] as usize];
            for (p, &size) in sizes.iter().enumerate() {
                let block = &order[start..start + size];
                let slot = neuron * n_partitions + p;
                if block.is_empty() {
                    lower[slot] = carry;
                    upper[slot] = carry;
                } else {
                    // block is sorted descending
                    upper[slot] = column[block[0] as usize];
                    lower[slot] = column[block[block.len() - 1] as usize];
                    carry = lower[slot];
                }
                for &input in block {
                    pids.set(neuron, input as usize, p as u32);
                }
                start += size;
            }
        }

        Ok(Self {
            layer: acts.layer(),
            n_inputs,
            n_neurons,
            n_partitions,
            pids,
            lower,
            upper,
        })
    }

    pub fn layer(&self) -> LayerId {
        self.layer
    }

    pub fn n_inputs(&self) -> usize {
        self.n_inputs
    }

    pub fn n_neurons(&self) -> usize {
        self.n_neurons
    }

    pub fn n_partitions(&self) -> usize {
        self.n_partitions
    }

    pub fn bits_per_pid(&self) -> u8 {
        self.pids.bits()
    }

    fn check_neuron(&self, neuron: usize) -> Result<()> {
        if neuron >= self.n_neurons {
            return Err(EverestError::out_of_range("neuron", neuron, self.n_neurons));
        }
        Ok(())
    }

    fn check_pid(&self, pid: PartitionId) -> Result<()> {
        if pid.0 as usize >= self.n_partitions {
            return Err(EverestError::out_of_range(
                "partition",
                pid.0 as usize,
                self.n_partitions,
            ));
        }
        Ok(())
    }

    pub fn get_pid(&self, neuron: usize, input: u32) -> Result<PartitionId> {
        self.check_neuron(neuron)?;
        if input as usize >= self.n_inputs {
            return Err(EverestError::out_of_range("inputID", input as usize, self.n_inputs));
        }
        Ok(PartitionId(self.pids.get(neuron, input as usize)))
    }

    /// Inputs of partition `pid` for `neuron`, ascending by ID.
    pub fn get_input_ids(&self, neuron: usize, pid: PartitionId) -> Result<Vec<u32>> {
        self.check_neuron(neuron)?;
        self.check_pid(pid)?;
        Ok((0..self.n_inputs as u32)
            .filter(|&x| self.pids.get(neuron, x as usize) == pid.0)
            .collect())
    }

    /// All partitions of `neuron` at once, indexed by PID.
    pub fn partition_members(&self, neuron: usize) -> Result<Vec<Vec<u32>>> {
        self.check_neuron(neuron)?;
        let mut out = vec![Vec::new(); self.n_partitions];
        for x in 0..self.n_inputs {
            out[self.pids.get(neuron, x) as usize].push(x as u32);
        }
        Ok(out)
    }

    /// `(lBnd, uBnd)` of a partition.
    pub fn bounds(&self, neuron: usize, pid: PartitionId) -> Result<(f32, f32)> {
        self.check_neuron(neuron)?;
        self.check_pid(pid)?;
        let slot = neuron * self.n_partitions + pid.0 as usize;
        Ok((self.lower[slot], self.upper[slot]))
    }

    pub fn pid_bytes(&self) -> usize {
        self.pids.as_bytes().len()
    }

    pub fn bounds_bytes(&self) -> usize {
        self.n_neurons * self.n_partitions * 2 * 4
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut out = Vec::with_capacity(28 + self.pid_bytes() + self.bounds_bytes());
        out.extend_from_slice(MAGIC);
        put_u32(&mut out, VERSION);
        put_u32(&mut out, self.layer.0);
        put_u32(&mut out, to_u32(self.n_inputs, "nInputs")?);
        put_u32(&mut out, to_u32(self.n_neurons, "nNeurons")?);
        put_u32(&mut out, to_u32(self.n_partitions, "nPartitions")?);
        out.push(self.pids.bits());
        out.extend_from_slice(&[0; 3]);
        out.extend_from_slice(self.pids.as_bytes());
        put_f32s(&mut out, &self.lower);
        put_f32s(&mut out, &self.upper);
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = ByteReader::new(bytes);
        r.magic(MAGIC)?;
        let at = r.offset();
        let version = r.u32("version")?;
        if version != VERSION {
            return Err(EverestError::format(at, format!("unsupported version {version}")));
        }
        let layer = LayerId(r.u32("layerId")?);
        let n_inputs = r.u32("nInputs")? as usize;
        let n_neurons = r.u32("nNeurons")? as usize;
        let at = r.offset();
        let n_partitions = r.u32("nPartitions")? as usize;
        if n_partitions == 0 {
            return Err(EverestError::format(at, "nPartitions is zero"));
        }
        let at = r.offset();
        let bits = r.u8("bitsPerPid")?;
        let expected = if n_partitions.is_power_of_two() {
            n_partitions.trailing_zeros() as u8
        } else {
            COMPAT_BITS
        };
        if bits != expected && !(bits == COMPAT_BITS && n_partitions <= 256) {
            return Err(EverestError::format(
                at,
                format!("bitsPerPid {bits} inconsistent with {n_partitions} partitions"),
            ));
        }
        r.take(3, "padding")?;
        let mut pids = PackedPids::new(n_neurons, n_inputs, bits);
        let at = r.offset();
        let raw = r.take(pids.data.len(), "PID rows")?;
        pids.data.copy_from_slice(raw);
        for neuron in 0..n_neurons {
            for x in 0..n_inputs {
                if pids.get(neuron, x) as usize >= n_partitions {
                    return Err(EverestError::format(
                        at + (neuron * pids.row_bytes) as u64,
                        format!("PID out of range for neuron {neuron}, input {x}"),
                    ));
                }
            }
        }
        let lower = r.f32s(n_neurons * n_partitions, "lower bounds")?;
        let upper = r.f32s(n_neurons * n_partitions, "upper bounds")?;
        r.finish()?;
        Ok(Self {
            layer,
            n_inputs,
            n_neurons,
            n_partitions,
            pids,
            lower,
            upper,
        })
    }
}

/// Checks the structural invariants against the matrix the index was built
/// from. Used by tests and by `everest verify`.
pub fn check_invariants(idx: &NeuralPartitionIndex, acts: &ActivationMatrix) -> Result<()> {
    let fail = |msg: String| Err(EverestError::ContractViolation(msg));
    for neuron in 0..idx.n_neurons() {
        for p in 0..idx.n_partitions() {
            let (lo, hi) = idx.bounds(neuron, PartitionId(p as u32))?;
            if lo > hi {
                return fail(format!("neuron {neuron} partition {p}: lower {lo} > upper {hi}"));
            }
            if p + 1 < idx.n_partitions() {
                let (_, next_hi) = idx.bounds(neuron, PartitionId(p as u32 + 1))?;
                if lo.total_cmp(&next_hi) == Ordering::Less {
                    return fail(format!("neuron {neuron}: partition {p} overlaps {}", p + 1));
                }
            }
        }
        for x in 0..idx.n_inputs() as u32 {
            let pid = idx.get_pid(neuron, x)?;
            let (lo, hi) = idx.bounds(neuron, pid)?;
            let a = acts.get(x as usize, neuron);
            if a < lo || a > hi {
                return fail(format!("neuron {neuron} input {x}: {a} outside [{lo}, {hi}]"));
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::demo;

    fn random_matrix(seed: u64, n: usize, m: usize) -> ActivationMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let v = (0..n * m)
            // coarse grid so ties show up
            .map(|_| (rng.gen_range(0..40) as f32) * 0.25)
            .collect();
        ActivationMatrix::new(LayerId(0), n, m, v).unwrap()
    }

    #[test]
    fn worked_example_table() {
        let acts = demo::partition_example();
        let idx = NeuralPartitionIndex::build_compat(&acts, 3).unwrap();
        // R1: {x0,x3} | {x1,x2} | {x4,x5}
        let r1: Vec<u32> = (0..6).map(|x| idx.get_pid(0, x).unwrap().0).collect();
        assert_eq!(r1, [0, 1, 1, 0, 2, 2]);
        // R2: {x0,x3} | {x4,x5} | {x1,x2}
        let r2: Vec<u32> = (0..6).map(|x| idx.get_pid(1, x).unwrap().0).collect();
        assert_eq!(r2, [0, 2, 2, 0, 1, 1]);
        // R3: {x0,x3} | {x1,x4} | {x2,x5}
        let r3: Vec<u32> = (0..6).map(|x| idx.get_pid(2, x).unwrap().0).collect();
        assert_eq!(r3, [0, 1, 2, 0, 1, 2]);
        assert_eq!(idx.get_pid(0, 5).unwrap(), PartitionId(2));
        assert_eq!(idx.get_input_ids(0, PartitionId(2)).unwrap(), vec![4, 5]);
        assert_eq!(idx.bounds(0, PartitionId(0)).unwrap(), (2.2, 2.5));
        assert_eq!(idx.bounds(0, PartitionId(1)).unwrap(), (1.5, 1.6));
        assert_eq!(idx.bounds(0, PartitionId(2)).unwrap(), (1.1, 1.2));
        assert_eq!(idx.bounds(2, PartitionId(1)).unwrap(), (1.4, 2.4));
        assert_eq!(idx.bits_per_pid(), 8);
    }

    #[test]
    fn non_power_of_two_rejected_outside_compat() {
        let acts = demo::partition_example();
        assert!(matches!(
            NeuralPartitionIndex::build(&acts, 3),
            Err(EverestError::Config(_))
        ));
    }

    #[test]
    fn single_partition_is_global_range() {
        let acts = random_matrix(1, 30, 4);
        let idx = NeuralPartitionIndex::build(&acts, 1).unwrap();
        assert_eq!(idx.bits_per_pid(), 0);
        assert_eq!(idx.pid_bytes(), 0);
        for n in 0..4 {
            let col = acts.column(n);
            let lo = col.iter().copied().fold(f32::INFINITY, f32::min);
            let hi = col.iter().copied().fold(f32::NEG_INFINITY, f32::max);
            assert_eq!(idx.bounds(n, PartitionId(0)).unwrap(), (lo, hi));
            assert!((0..30).all(|x| idx.get_pid(n, x).unwrap() == PartitionId(0)));
        }
    }

    #[test]
    fn lookups_out_of_range() {
        let acts = random_matrix(2, 8, 2);
        let idx = NeuralPartitionIndex::build(&acts, 2).unwrap();
        assert!(idx.get_pid(2, 0).is_err());
        assert!(idx.get_pid(0, 8).is_err());
        assert!(idx.get_input_ids(0, PartitionId(2)).is_err());
        assert!(idx.bounds(5, PartitionId(0)).is_err());
    }

    #[test]
    fn random_matrix_matches_sort_oracle() {
        let n = 100;
        let acts = random_matrix(3, n, 5);
        for parts in [1usize, 2, 4, 8, 16, 64] {
            let idx = NeuralPartitionIndex::build(&acts, parts).unwrap();
            check_invariants(&idx, &acts).unwrap();
            for neuron in 0..5 {
                let col = acts.column(neuron);
                // rank oracle: position in a descending stable sort on (value desc, id asc)
                let mut ranked: Vec<(f32, u32)> = col.iter().enumerate().map(|(i, v)| (*v, i as u32)).collect();
                ranked.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
                let mut cuts = Vec::new();
                let mut acc = 0;
                for p in 0..parts {
                    acc += n / parts + usize::from(p < n % parts);
                    cuts.push(acc);
                }
                for (rank, (_, id)) in ranked.iter().enumerate() {
                    let expect = cuts.iter().position(|&c| rank < c).unwrap() as u32;
                    assert_eq!(idx.get_pid(neuron, *id).unwrap().0, expect);
                }
                // PID order implies activation order
                for x in 0..n as u32 {
                    for y in 0..n as u32 {
                        if idx.get_pid(neuron, x).unwrap() < idx.get_pid(neuron, y).unwrap() {
                            assert!(col[x as usize] >= col[y as usize]);
                        }
                    }
                }
                // sizes, disjoint cover, bounds recomputed from members
                let members = idx.partition_members(neuron).unwrap();
                let mut seen = vec![false; n];
                for (p, ids) in members.iter().enumerate() {
                    assert!(ids.len() == n / parts || ids.len() == n.div_ceil(parts));
                    assert_eq!(ids, &idx.get_input_ids(neuron, PartitionId(p as u32)).unwrap());
                    let vals: Vec<f32> = ids.iter().map(|&x| col[x as usize]).collect();
                    let lo = vals.iter().copied().fold(f32::INFINITY, f32::min);
                    let hi = vals.iter().copied().fold(f32::NEG_INFINITY, f32::max);
                    assert_eq!(idx.bounds(neuron, PartitionId(p as u32)).unwrap(), (lo, hi));
                    for &x in ids {
                        assert!(!seen[x as usize]);
                        seen[x as usize] = true;
                    }
                }
                assert!(seen.iter().all(|s| *s));
            }
        }
    }

    #[test]
    fn storage_matches_formulas() {
        let acts = random_matrix(4, 100, 7);
        for parts in [2usize, 4, 8, 32] {
            let idx = NeuralPartitionIndex::build(&acts, parts).unwrap();
            let bits = parts.trailing_zeros() as usize;
            let exact = (7 * 100 * bits).div_ceil(8);
            assert!(idx.pid_bytes() >= exact && idx.pid_bytes() <= exact + 7);
            assert_eq!(idx.bounds_bytes(), 7 * parts * 2 * 4);
            assert_eq!(idx.to_bytes().unwrap().len(), 28 + idx.pid_bytes() + idx.bounds_bytes());
        }
    }

    #[test]
    fn head_partition_holds_top_entries() {
        let acts = demo::mai_example();
        let idx = NeuralPartitionIndex::build_with_head(&acts, 3, 4).unwrap();
        check_invariants(&idx, &acts).unwrap();
        for neuron in 0..3 {
            let members = idx.partition_members(neuron).unwrap();
            assert_eq!(members.iter().map(Vec::len).collect::<Vec<_>>(), [4, 1, 1]);
        }
        // x0 is not among R3's top four
        assert_eq!(idx.get_pid(2, 0).unwrap(), PartitionId(1));
    }

    #[test]
    fn empty_tail_partitions_get_collapsed_bounds() {
        let acts = random_matrix(5, 10, 2);
        let idx = NeuralPartitionIndex::build_with_head(&acts, 8, 8).unwrap();
        check_invariants(&idx, &acts).unwrap();
        let sizes: Vec<usize> = idx.partition_members(0).unwrap().iter().map(Vec::len).collect();
        assert_eq!(sizes, [8, 1, 1, 0, 0, 0, 0, 0]);
    }

    #[test]
    fn corrupt_magic_and_truncation() {
        let acts = random_matrix(6, 20, 3);
        let bytes = NeuralPartitionIndex::build(&acts, 4).unwrap().to_bytes().unwrap();
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(
            NeuralPartitionIndex::from_bytes(&bad),
            Err(EverestError::Format { offset: 0, .. })
        ));
        assert!(matches!(
            NeuralPartitionIndex::from_bytes(&bytes[..bytes.len() - 1]),
            Err(EverestError::Format { .. })
        ));
    }

    proptest! {
        #[test]
        fn packed_array_round_trips(bits in 0u8..=12, vals in prop::collection::vec(any::<u32>(), 0..50), rows in 1usize..4) {
            let mask = if bits == 0 { 0 } else { (1u32 << bits) - 1 };
            let mut p = PackedPids::new(rows, vals.len(), bits);
            for r in 0..rows {
                for (c, v) in vals.iter().enumerate() {
                    p.set(r, c, (v.rotate_left(r as u32)) & mask);
                }
            }
            for r in 0..rows {
                for (c, v) in vals.iter().enumerate() {
                    prop_assert_eq!(p.get(r, c), v.rotate_left(r as u32) & mask);
                }
            }
        }

        #[test]
        fn file_round_trip_is_bit_exact(seed in any::<u64>(), n in 1usize..40, m in 1usize..5, log in 0u32..4) {
            let parts = (1usize << log).min(n.next_power_of_two() / 2).max(1);
            let acts = random_matrix(seed, n, m);
            let idx = NeuralPartitionIndex::build(&acts, parts).unwrap();
            let bytes = idx.to_bytes().unwrap();
            let back = NeuralPartitionIndex::from_bytes(&bytes).unwrap();
            prop_assert_eq!(&back, &idx);
            prop_assert_eq!(back.to_bytes().unwrap(), bytes);
        }
    }

    #[test]
    fn rebuild_is_identical() {
        let acts = random_matrix(7, 64, 4);
        let a = NeuralPartitionIndex::build(&acts, 8).unwrap();
        let b = NeuralPartitionIndex::build(&acts, 8).unwrap();
        assert_eq!(a.to_bytes().unwrap(), b.to_bytes().unwrap());
    }
}
