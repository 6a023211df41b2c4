use std::collections::BTreeMap;

use num_traits::{pow, Num};

use super::{
    hebbian_update, mbpa_update, AdaptationConfig, AdaptationDelta, AdaptationMode, ClassDelta,
};
use crate::classifier::OutputLayer;
use crate::error::{Error, Result};
use crate::memory::Neighborhood;
use crate::scalar::{axpy, Real};
use crate::ClassId;

/// `E_i = (1 - β) / (1 - β^{n_i})`, with `E_i = 1` for a class never seen.
///
/// Generic over any ordered numeric type so the law can also be evaluated in
/// exact rational arithmetic.
pub fn dynamic_weight<T>(count: usize, beta: T) -> Result<T>
where
    T: Num + Clone + PartialOrd,
{
    if !(beta >= T::zero() && beta < T::one()) {
        return Err(Error::param("beta", "must lie in [0, 1)"));
    }
    if count == 0 {
        return Ok(T::one());
    }
    let decay = pow(beta.clone(), count);
    Ok((T::one() - beta) / (T::one() - decay))
}

/// Combines MbPA and Hebbian deltas per class as
/// `Δω_i = (1 - E_i) Δ^MbPA_i + E_i η Δ^Hebb_i` according to `cfg.mode`.
///
/// `nbrs` is the full neighborhood `N`, `new_nbrs` the subset whose labels
/// were unseen at pre-training, `counts` the per-class memory counts `n_i`.
/// An empty `nbrs` yields an empty delta.
pub fn mixed_update<T: Real>(
    layer: &OutputLayer<T>,
    nbrs: &Neighborhood<T>,
    new_nbrs: &Neighborhood<T>,
    counts: &BTreeMap<ClassId, usize>,
    cfg: &AdaptationConfig<T>,
) -> Result<AdaptationDelta<T>> {
    cfg.validate()?;
    if nbrs.is_empty() {
        return Ok(AdaptationDelta::new());
    }
    let weight_for = |class: ClassId| -> Result<T> {
        match cfg.mode {
            AdaptationMode::HebbV3 { weight } => Ok(weight),
            _ => dynamic_weight(counts.get(&class).copied().unwrap_or(0), cfg.beta),
        }
    };

    match cfg.mode {
        AdaptationMode::MixtureOnly => Ok(AdaptationDelta::new()),
        AdaptationMode::MbPAOnly => mbpa_update(layer, nbrs, cfg.lambda, cfg.steps),
        AdaptationMode::HebbV1 => Ok(hebbian_update(new_nbrs).scaled(cfg.eta)),
        AdaptationMode::Hebb | AdaptationMode::HebbV2 | AdaptationMode::HebbV3 { .. } => {
            let hebb_source = if cfg.mode == AdaptationMode::HebbV2 {
                nbrs
            } else {
                new_nbrs
            };
            let mbpa = mbpa_update(layer, nbrs, cfg.lambda, cfg.steps)?;
            let hebb = hebbian_update(hebb_source);
            hebb.check_against(layer)?;

            let mut out = AdaptationDelta::new();
            let classes: std::collections::BTreeSet<ClassId> =
                mbpa.classes().chain(hebb.classes()).collect();
            for class in classes {
                let e = weight_for(class)?;
                let mut d = ClassDelta::zeros(layer.dim());
                if let Some(m) = mbpa.get(class) {
                    let w = T::one() - e;
                    axpy(w, &m.weights, &mut d.weights);
                    d.bias += w * m.bias;
                }
                if let Some(h) = hebb.get(class) {
                    let w = e * cfg.eta;
                    axpy(w, &h.weights, &mut d.weights);
                    d.bias += w * h.bias;
                }
                out.insert(class, d);
            }
            Ok(out)
        }
    }
}
