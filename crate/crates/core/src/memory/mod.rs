//! Episodic key-value memory over input representations.
//!
//! Keys are representation vectors, values are class labels. Retrieval is an
//! exact linear scan that keeps the `k` best candidates in a bounded max-heap;
//! each retrieved neighbor carries the closeness `1 / (eps + ||h - h_k||^2)`.

mod neighborhood;
mod snapshot;

use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap, VecDeque};

use crate::error::{Error, Result};
use crate::scalar::{all_finite, squared_distance, Real};
use crate::ClassId;

pub use neighborhood::{Neighbor, Neighborhood};

/// Default kernel offset used when none is configured.
pub const DEFAULT_EPS: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Capacity {
    Unbounded,
    /// Keeps the `n` most recent entries; the oldest is evicted first.
    RingBuffer(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct MemoryEntry<T> {
    pub key: Vec<T>,
    pub value: ClassId,
    pub seq: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodicMemory<T> {
    dim: usize,
    capacity: Capacity,
    entries: VecDeque<MemoryEntry<T>>,
    class_counts: BTreeMap<ClassId, usize>,
    next_seq: u64,
}

impl<T: Real> EpisodicMemory<T> {
    pub fn new(dim: usize, capacity: Capacity) -> Result<Self> {
        if dim == 0 {
            return Err(Error::param("dim", "must be positive"));
        }
        if capacity == Capacity::RingBuffer(0) {
            return Err(Error::param(
                "capacity",
                "ring buffer size must be positive",
            ));
        }
        Ok(EpisodicMemory {
            dim,
            capacity,
            entries: VecDeque::new(),
            class_counts: BTreeMap::new(),
            next_seq: 0,
        })
    }

    pub fn unbounded(dim: usize) -> Result<Self> {
        Self::new(dim, Capacity::Unbounded)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn capacity(&self) -> Capacity {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Sequence number the next write will receive.
    pub fn next_seq(&self) -> u64 {
        self.next_seq
    }

    /// Entries in insertion order (ascending `seq`).
    pub fn entries(&self) -> impl ExactSizeIterator<Item = &MemoryEntry<T>> {
        self.entries.iter()
    }

    /// Live per-class entry counts. Classes with no live entries are absent.
    pub fn class_counts(&self) -> &BTreeMap<ClassId, usize> {
        &self.class_counts
    }

    pub fn class_count(&self, class: ClassId) -> usize {
        self.class_counts.get(&class).copied().unwrap_or(0)
    }

    /// Appends `(key, value)` and applies the capacity policy. Returns the
    /// sequence number assigned to the new entry.
    pub fn write(&mut self, key: &[T], value: ClassId) -> Result<u64> {
        self.check_query(key, "memory key")?;
        let seq = self.next_seq;
        self.next_seq += 1;
        self.entries.push_back(MemoryEntry {
            key: key.to_vec(),
            value,
            seq,
        });
        *self.class_counts.entry(value).or_insert(0) += 1;

        if let Capacity::RingBuffer(max) = self.capacity {
            while self.entries.len() > max {
                let evicted = self.entries.pop_front().expect("non-empty");
                self.decrement(evicted.value);
            }
        }
        Ok(seq)
    }

    fn decrement(&mut self, class: ClassId) {
        if let Some(count) = self.class_counts.get_mut(&class) {
            *count -= 1;
            if *count == 0 {
                self.class_counts.remove(&class);
            }
        }
    }

    fn check_query(&self, h: &[T], what: &'static str) -> Result<()> {
        if h.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                actual: h.len(),
            });
        }
        if !all_finite(h) {
            return Err(Error::NonFinite(what));
        }
        Ok(())
    }

    /// Exact k-nearest-neighbor retrieval under squared Euclidean distance.
    ///
    /// Returns `min(k, len)` neighbors ordered by ascending distance, ties
    /// resolved in favor of the older entry.
    pub fn retrieve_knn(&self, h: &[T], k: usize, eps: T) -> Result<Neighborhood<T>> {
        if k == 0 {
            return Err(Error::ZeroK);
        }
        if !(eps > T::zero()) || !eps.is_finite() {
            return Err(Error::param("eps", "must be positive and finite"));
        }
        self.check_query(h, "query")?;
        if self.entries.is_empty() {
            return Err(Error::EmptyMemory);
        }

        let mut heap: BinaryHeap<Candidate<T>> = BinaryHeap::with_capacity(k + 1);
        for (index, entry) in self.entries.iter().enumerate() {
            let cand = Candidate {
                sq_dist: squared_distance(h, &entry.key),
                seq: entry.seq,
                index,
            };
            if heap.len() < k {
                heap.push(cand);
            } else if cand < *heap.peek().expect("k > 0") {
                heap.pop();
                heap.push(cand);
            }
        }

        let items = heap
            .into_sorted_vec()
            .into_iter()
            .map(|c| {
                let entry = &self.entries[c.index];
                Neighbor {
                    key: entry.key.clone(),
                    label: entry.value,
                    closeness: T::one() / (eps + c.sq_dist),
                    sq_dist: c.sq_dist,
                    seq: entry.seq,
                }
            })
            .collect();
        Ok(Neighborhood::from_sorted(items))
    }
}

/// Heap element ordered by `(sq_dist, seq)`; the heap top is the worst kept candidate.
struct Candidate<T> {
    sq_dist: T,
    seq: u64,
    index: usize,
}

impl<T: Real> PartialEq for Candidate<T> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl<T: Real> Eq for Candidate<T> {}

impl<T: Real> PartialOrd for Candidate<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<T: Real> Ord for Candidate<T> {
    fn cmp(&self, other: &Self) -> Ordering {
        // keys and queries are finite, so distances are never NaN
        self.sq_dist
            .partial_cmp(&other.sq_dist)
            .unwrap_or(Ordering::Equal)
            .then(self.seq.cmp(&other.seq))
    }
}
