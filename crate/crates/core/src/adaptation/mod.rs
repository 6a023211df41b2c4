//! Inference-time local adaptation of the output layer.
//!
//! Every routine here is a pure function of its inputs. The result is an
//! [`AdaptationDelta`] that is added to the layer for one prediction and then
//! dropped; the layer itself is never written.

mod hebbian;
mod mbpa;
mod mixing;

use std::collections::BTreeMap;

use crate::classifier::OutputLayer;
use crate::error::{Error, Result};
use crate::scalar::{softmax, Real};
use crate::ClassId;

pub use hebbian::hebbian_update;
pub use mbpa::{decompose_mbpa, likelihood_gradient, mbpa_loss, mbpa_update};
pub use mixing::{dynamic_weight, mixed_update};

/// Update for one class: `(Δw_i, Δb_i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassDelta<T> {
    pub weights: Vec<T>,
    pub bias: T,
}

impl<T: Real> ClassDelta<T> {
    pub fn zeros(dim: usize) -> Self {
        ClassDelta {
            weights: vec![T::zero(); dim],
            bias: T::zero(),
        }
    }

    pub fn scaled(&self, factor: T) -> Self {
        ClassDelta {
            weights: self.weights.iter().map(|&w| w * factor).collect(),
            bias: self.bias * factor,
        }
    }
}

/// Sparse per-class parameter update. Classes without an entry are untouched.
#[derive(Debug, Clone, PartialEq)]
pub struct AdaptationDelta<T> {
    classes: BTreeMap<ClassId, ClassDelta<T>>,
}

impl<T> Default for AdaptationDelta<T> {
    fn default() -> Self {
        AdaptationDelta {
            classes: BTreeMap::new(),
        }
    }
}

impl<T: Real> AdaptationDelta<T> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, class: ClassId, delta: ClassDelta<T>) {
        self.classes.insert(class, delta);
    }

    pub fn get(&self, class: ClassId) -> Option<&ClassDelta<T>> {
        self.classes.get(&class)
    }

    pub fn iter(&self) -> impl Iterator<Item = (ClassId, &ClassDelta<T>)> {
        self.classes.iter().map(|(&c, d)| (c, d))
    }

    pub fn classes(&self) -> impl Iterator<Item = ClassId> + '_ {
        self.classes.keys().copied()
    }

    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    pub fn scaled(&self, factor: T) -> Self {
        AdaptationDelta {
            classes: self
                .classes
                .iter()
                .map(|(&c, d)| (c, d.scaled(factor)))
                .collect(),
        }
    }

    /// Checks that every class is registered in `layer` and has its dimension.
    pub fn check_against(&self, layer: &OutputLayer<T>) -> Result<()> {
        for (&class, d) in &self.classes {
            layer.check_class(class)?;
            if d.weights.len() != layer.dim() {
                return Err(Error::DimensionMismatch {
                    expected: layer.dim(),
                    actual: d.weights.len(),
                });
            }
        }
        Ok(())
    }

    /// A copy of `layer` with the delta added.
    pub fn applied_to(&self, layer: &OutputLayer<T>) -> Result<OutputLayer<T>> {
        self.check_against(layer)?;
        let mut out = layer.clone();
        for (&class, d) in &self.classes {
            for (w, &dw) in out.columns_mut()[class].iter_mut().zip(&d.weights) {
                *w += dw;
            }
            out.biases_mut()[class] += d.bias;
        }
        Ok(out)
    }
}

/// Which combination of updates [`mixed_update`] produces.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AdaptationMode<T> {
    /// MbPA over `N` blended with Hebbian over `N^new` by the dynamic weight.
    Hebb,
    MbPAOnly,
    /// Hebbian over `N^new` only.
    HebbV1,
    /// Like `Hebb` but the Hebbian term uses all of `N`.
    HebbV2,
    /// Like `Hebb` with a fixed blend weight in `[0, 1]`.
    HebbV3 {
        weight: T,
    },
    /// No parametric adaptation.
    MixtureOnly,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdaptationConfig<T> {
    /// Neighbors retrieved per query.
    pub k: usize,
    /// Kernel offset in `1 / (eps + d^2)`.
    pub eps: T,
    /// MbPA step size.
    pub lambda: T,
    /// MbPA gradient steps.
    pub steps: usize,
    /// Hebbian scale.
    pub eta: T,
    /// Decay of the dynamic weight, in `[0, 1)`.
    pub beta: T,
    pub mode: AdaptationMode<T>,
}

impl<T: Real> Default for AdaptationConfig<T> {
    fn default() -> Self {
        AdaptationConfig {
            k: 50,
            eps: T::lit(1e-3),
            lambda: T::lit(0.05),
            steps: 5,
            eta: T::lit(0.2),
            beta: T::lit(0.9),
            mode: AdaptationMode::Hebb,
        }
    }
}

impl<T: Real> AdaptationConfig<T> {
    pub fn validate(&self) -> Result<()> {
        let positive = |v: T| v > T::zero() && v.is_finite();
        if self.k == 0 {
            return Err(Error::ZeroK);
        }
        if !positive(self.eps) {
            return Err(Error::param("eps", "must be positive"));
        }
        if !positive(self.lambda) {
            return Err(Error::param("lambda", "must be positive"));
        }
        if self.steps == 0 {
            return Err(Error::param("steps", "must be at least 1"));
        }
        if !positive(self.eta) {
            return Err(Error::param("eta", "must be positive"));
        }
        if !(self.beta >= T::zero() && self.beta < T::one()) {
            return Err(Error::param("beta", "must lie in [0, 1)"));
        }
        if let AdaptationMode::HebbV3 { weight } = self.mode {
            if !(weight >= T::zero() && weight <= T::one()) {
                return Err(Error::param("weight", "fixed weight must lie in [0, 1]"));
            }
        }
        Ok(())
    }
}

/// `softmax((W + ΔW)^T h + (b + Δb))` without touching `layer`.
pub fn adapted_predict<T: Real>(
    layer: &OutputLayer<T>,
    delta: &AdaptationDelta<T>,
    h: &[T],
) -> Result<Vec<T>> {
    layer.check_dim(h)?;
    delta.check_against(layer)?;
    let logits: Vec<T> = (0..layer.num_classes())
        .map(|class| {
            let w = layer.column(class);
            let b = layer.bias(class);
            match delta.get(class) {
                None => w.iter().zip(h).fold(b, |acc, (&wi, &x)| acc + wi * x),
                Some(d) => w
                    .iter()
                    .zip(&d.weights)
                    .zip(h)
                    .fold(b + d.bias, |acc, ((&wi, &dw), &x)| acc + (wi + dw) * x),
            }
        })
        .collect();
    Ok(softmax(&logits))
}
