use std::collections::BTreeMap;

use super::{AdaptationDelta, ClassDelta};
use crate::memory::Neighborhood;
use crate::scalar::{axpy, Real};
use crate::ClassId;

/// Hebbian update: for every label `i` present in `nbrs`,
/// `Δw_i = mean_{k in N_i} c_k h_k` and `Δb_i = mean_{k in N_i} c_k`.
///
/// Only labels that occur in the neighborhood receive an entry.
pub fn hebbian_update<T: Real>(nbrs: &Neighborhood<T>) -> AdaptationDelta<T> {
    let Some(dim) = nbrs.dim() else {
        return AdaptationDelta::new();
    };
    let mut sums: BTreeMap<ClassId, (ClassDelta<T>, usize)> = BTreeMap::new();
    for n in nbrs {
        let (acc, count) = sums
            .entry(n.label)
            .or_insert_with(|| (ClassDelta::zeros(dim), 0));
        axpy(n.closeness, &n.key, &mut acc.weights);
        acc.bias += n.closeness;
        *count += 1;
    }
    let mut delta = AdaptationDelta::new();
    for (class, (acc, count)) in sums {
        delta.insert(class, acc.scaled(T::one() / T::from_count(count)));
    }
    delta
}
