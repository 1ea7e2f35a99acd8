use std::cmp::Ordering;
use std::collections::BinaryHeap;

/// A candidate ranked by `key` (smaller is better), ties by discovery order.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Ranked {
    pub key: f64,
    pub seq: u64,
    pub input: u32,
}

impl PartialEq for Ranked {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Ranked {}

impl PartialOrd for Ranked {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Ranked {
    fn cmp(&self, other: &Self) -> Ordering {
        self.key.total_cmp(&other.key).then(self.seq.cmp(&other.seq))
    }
}

/// Bounded set of the `k` best candidates seen so far. A newcomer only
/// displaces the current worst when strictly better, so earlier discoveries
/// win ties.
#[derive(Debug)]
pub(crate) struct TopK {
    k: usize,
    heap: BinaryHeap<Ranked>,
    next_seq: u64,
}

impl TopK {
    pub fn new(k: usize) -> Self {
        Self {
            k,
            heap: BinaryHeap::with_capacity(k.min(4096) + 1),
            next_seq: 0,
        }
    }

    pub fn offer(&mut self, input: u32, key: f64) {
        let item = Ranked {
            key,
            seq: self.next_seq,
            input,
        };
        self.next_seq += 1;
        if self.heap.len() < self.k {
            self.heap.push(item);
        } else if let Some(worst) = self.heap.peek() {
            if key < worst.key {
                self.heap.pop();
                self.heap.push(item);
            }
        }
    }

    pub fn is_full(&self) -> bool {
        self.heap.len() >= self.k
    }

    pub fn worst_key(&self) -> Option<f64> {
        self.heap.peek().map(|r| r.key)
    }

    pub fn sorted(&self) -> Vec<Ranked> {
        let mut v: Vec<Ranked> = self.heap.iter().copied().collect();
        v.sort();
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn keeps_k_smallest_and_earlier_ties() {
        let mut t = TopK::new(2);
        t.offer(7, 3.0);
        t.offer(8, 1.0);
        t.offer(9, 3.0); // tie with worst: rejected
        t.offer(10, 2.0);
        let ids: Vec<u32> = t.sorted().iter().map(|r| r.input).collect();
        assert_eq!(ids, [8, 10]);
        assert_eq!(t.worst_key(), Some(2.0));
    }
}
