//! Inter-query activation cache.
//!
//! Holds full-layer activation rows keyed by `(layer, input)` under a byte
//! budget and evicts the *most* recently used row first. Queries visit
//! partitions from most to least similar, so MRU eviction keeps the rows
//! from the earliest (most similar) partitions of a query resident for the
//! next related query.

use std::collections::{BTreeMap, HashMap};

use serde::Serialize;

use crate::source::LayerId;

#[derive(Debug)]
struct Slot {
    row: Vec<f32>,
    stamp: u64,
}

#[derive(Debug, Default)]
pub struct ActivationCache {
    budget_bytes: u64,
    used_bytes: u64,
    clock: u64,
    rows: HashMap<(LayerId, u32), Slot>,
    by_stamp: BTreeMap<u64, (LayerId, u32)>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct CacheStats {
    pub budget_bytes: u64,
    pub used_bytes: u64,
    pub rows: usize,
}

impl ActivationCache {
    pub fn new(budget_bytes: u64) -> Self {
        Self {
            budget_bytes,
            ..Self::default()
        }
    }

    pub fn budget_bytes(&self) -> u64 {
        self.budget_bytes
    }

    pub fn used_bytes(&self) -> u64 {
        self.used_bytes
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn stats(&self) -> CacheStats {
        CacheStats {
            budget_bytes: self.budget_bytes,
            used_bytes: self.used_bytes,
            rows: self.rows.len(),
        }
    }

    fn touch(&mut self, key: (LayerId, u32)) {
        self.clock += 1;
        let stamp = self.clock;
        if let Some(slot) = self.rows.get_mut(&key) {
            self.by_stamp.remove(&slot.stamp);
            slot.stamp = stamp;
            self.by_stamp.insert(stamp, key);
        }
    }

    /// Splits `ids` into cached rows and misses. Hits become most recently used.
    pub fn lookup(&mut self, layer: LayerId, ids: &[u32]) -> (HashMap<u32, Vec<f32>>, Vec<u32>) {
        let mut hits = HashMap::new();
        let mut misses = Vec::new();
        for &id in ids {
            let key = (layer, id);
            match self.rows.get(&key) {
                Some(slot) => {
                    hits.insert(id, slot.row.clone());
                    self.touch(key);
                }
                None => misses.push(id),
            }
        }
        (hits, misses)
    }

    pub fn contains(&self, layer: LayerId, id: u32) -> bool {
        self.rows.contains_key(&(layer, id))
    }

    /// Caches `row`, evicting most-recently-used rows until it fits. A row
    /// larger than the whole budget is dropped silently.
    pub fn insert(&mut self, layer: LayerId, id: u32, row: Vec<f32>) {
        let bytes = (row.len() * 4) as u64;
        if bytes > self.budget_bytes {
            return;
        }
        let key = (layer, id);
        if let Some(old) = self.rows.remove(&key) {
            self.by_stamp.remove(&old.stamp);
            self.used_bytes -= (old.row.len() * 4) as u64;
        }
        while self.used_bytes + bytes > self.budget_bytes {
            let Some((&stamp, &victim)) = self.by_stamp.iter().next_back() else {
                break;
            };
            self.by_stamp.remove(&stamp);
            if let Some(slot) = self.rows.remove(&victim) {
                self.used_bytes -= (slot.row.len() * 4) as u64;
            }
        }
        self.clock += 1;
        self.by_stamp.insert(self.clock, key);
        self.rows.insert(key, Slot { row, stamp: self.clock });
        self.used_bytes += bytes;
    }

    pub fn clear(&mut self) {
        self.rows.clear();
        self.by_stamp.clear();
        self.used_bytes = 0;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const L: LayerId = LayerId(0);

    fn row(v: f32) -> Vec<f32> {
        vec![v; 4]
    }

    #[test]
    fn empty_cache_misses_everything() {
        let mut c = ActivationCache::new(1024);
        let (hits, misses) = c.lookup(L, &[1, 2, 3]);
        assert!(hits.is_empty());
        assert_eq!(misses, [1, 2, 3]);
    }

    #[test]
    fn insert_then_hit() {
        let mut c = ActivationCache::new(1024);
        c.insert(L, 9, row(1.0));
        let (hits, misses) = c.lookup(L, &[9]);
        assert_eq!(hits[&9], row(1.0));
        assert!(misses.is_empty());
        // layers are separate keys
        assert!(!c.contains(LayerId(1), 9));
    }

    #[test]
    fn one_row_budget_keeps_newest() {
        let mut c = ActivationCache::new(16);
        c.insert(L, 1, row(1.0));
        c.insert(L, 2, row(2.0));
        assert!(!c.contains(L, 1));
        assert!(c.contains(L, 2));
    }

    #[test]
    fn evicts_most_recently_used() {
        // hand trace: A,B,C inserted, B touched -> stamps A1 B4 C3, D evicts B
        let mut c = ActivationCache::new(48);
        c.insert(L, 0xA, row(1.0));
        c.insert(L, 0xB, row(2.0));
        c.insert(L, 0xC, row(3.0));
        c.lookup(L, &[0xB]);
        c.insert(L, 0xD, row(4.0));
        assert!(c.contains(L, 0xA));
        assert!(!c.contains(L, 0xB));
        assert!(c.contains(L, 0xC));
        assert!(c.contains(L, 0xD));
        assert_eq!(c.used_bytes(), 48);
    }

    #[test]
    fn zero_budget_is_a_no_op() {
        let mut c = ActivationCache::new(0);
        c.insert(L, 1, row(1.0));
        assert!(c.is_empty());
        assert_eq!(c.used_bytes(), 0);
    }

    #[test]
    fn oversized_row_is_not_cached() {
        let mut c = ActivationCache::new(8);
        c.insert(L, 1, row(1.0));
        assert!(c.is_empty());
    }

    #[test]
    fn budget_never_exceeded() {
        let mut c = ActivationCache::new(100);
        for i in 0..200u32 {
            c.insert(L, i % 37, vec![0.0; (i % 7 + 1) as usize]);
            assert!(c.used_bytes() <= 100);
            let total: u64 = c.rows.values().map(|s| s.row.len() as u64 * 4).sum();
            assert_eq!(total, c.used_bytes());
            assert_eq!(c.rows.len(), c.by_stamp.len());
        }
    }
}
