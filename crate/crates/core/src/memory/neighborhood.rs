use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::ClassId;

/// One retrieved memory entry together with its closeness to the query.
#[derive(Debug, Clone, PartialEq)]
pub struct Neighbor<T> {
    pub key: Vec<T>,
    pub label: ClassId,
    pub closeness: T,
    pub sq_dist: T,
    pub seq: u64,
}

impl<T: Real> Neighbor<T> {
    /// A neighbor built by hand (tests, tooling). Distance is unknown and
    /// recorded as zero.
    pub fn new(key: Vec<T>, label: ClassId, closeness: T) -> Self {
        Neighbor {
            key,
            label,
            closeness,
            sq_dist: T::zero(),
            seq: 0,
        }
    }
}

/// The retrieved set `N`, nearest first.
#[derive(Debug, Clone, PartialEq)]
pub struct Neighborhood<T> {
    items: Vec<Neighbor<T>>,
}

impl<T> Default for Neighborhood<T> {
    fn default() -> Self {
        Neighborhood { items: Vec::new() }
    }
}

impl<T: Real> Neighborhood<T> {
    /// Wraps hand-built items, keeping their order. Every closeness must be
    /// positive and finite and all keys must share one dimension.
    pub fn new(items: Vec<Neighbor<T>>) -> Result<Self> {
        if let Some(first) = items.first() {
            let dim = first.key.len();
            for item in &items {
                if item.key.len() != dim {
                    return Err(Error::DimensionMismatch {
                        expected: dim,
                        actual: item.key.len(),
                    });
                }
                if !(item.closeness > T::zero()) || !item.closeness.is_finite() {
                    return Err(Error::param("closeness", "must be positive and finite"));
                }
            }
        }
        Ok(Neighborhood { items })
    }

    pub(crate) fn from_sorted(items: Vec<Neighbor<T>>) -> Self {
        Neighborhood { items }
    }

    pub fn items(&self) -> &[Neighbor<T>] {
        &self.items
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Neighbor<T>> {
        self.items.iter()
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// Key dimension, if any neighbor is present.
    pub fn dim(&self) -> Option<usize> {
        self.items.first().map(|n| n.key.len())
    }

    /// Distinct labels present, ascending.
    pub fn labels(&self) -> BTreeSet<ClassId> {
        self.items.iter().map(|n| n.label).collect()
    }

    /// Splits into `(N_i, N̄_i)`: items labelled `class` and everything else.
    pub fn partition(&self, class: ClassId) -> (Neighborhood<T>, Neighborhood<T>) {
        let (same, other): (Vec<_>, Vec<_>) =
            self.items.iter().cloned().partition(|n| n.label == class);
        (Neighborhood { items: same }, Neighborhood { items: other })
    }

    /// `N^new`: items whose label was not part of the pre-training classes.
    pub fn select_new(&self, pretrain_classes: &BTreeSet<ClassId>) -> Neighborhood<T> {
        Neighborhood {
            items: self
                .items
                .iter()
                .filter(|n| !pretrain_classes.contains(&n.label))
                .cloned()
                .collect(),
        }
    }
}

impl<'a, T> IntoIterator for &'a Neighborhood<T> {
    type Item = &'a Neighbor<T>;
    type IntoIter = std::slice::Iter<'a, Neighbor<T>>;

    fn into_iter(self) -> Self::IntoIter {
        self.items.iter()
    }
}
