//! Comparison methods: plain parametric fine-tuning and the mixture of the
//! parametric softmax with a kernel score over retrieved neighbors.

use crate::classifier::{train, FeatureExtractor, LabeledExample, OutputLayer, TrainConfig};
use crate::error::{Error, Result};
use crate::memory::Neighborhood;
use crate::scalar::{dot, Real};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixtureConfig<T> {
    /// Weight of the non-parametric term, in `[0, 1]`.
    pub gamma: T,
    /// Inverse temperature of the neighbor scores `exp(θ h_k·h)`.
    pub theta: T,
    /// Normalize each term to a distribution before mixing.
    pub normalize_terms: bool,
}

impl<T: Real> Default for MixtureConfig<T> {
    fn default() -> Self {
        MixtureConfig {
            gamma: T::lit(0.1),
            theta: T::one(),
            normalize_terms: false,
        }
    }
}

impl<T: Real> MixtureConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma >= T::zero() && self.gamma <= T::one()) {
            return Err(Error::param("gamma", "must lie in [0, 1]"));
        }
        if !(self.theta > T::zero()) || !self.theta.is_finite() {
            return Err(Error::param("theta", "must be positive"));
        }
        Ok(())
    }
}

/// `P(y) ∝ (1-γ) exp(f_y(h)) + γ Σ_k 1(y_k = y) exp(θ h_k·h)`.
///
/// The two exponential families are each shifted by their own maximum before
/// exponentiation, so the parametric term is `exp(f_y - max f)` and the
/// neighbor term `exp(θ h_k·h - max_k θ h_k·h)`. With `normalize_terms` each
/// family is additionally divided by its own total.
pub fn mixture_predict<T: Real>(
    layer: &OutputLayer<T>,
    nbrs: &Neighborhood<T>,
    h: &[T],
    cfg: &MixtureConfig<T>,
) -> Result<Vec<T>> {
    cfg.validate()?;
    let logits = layer.logits(h)?;
    for n in nbrs {
        layer.check_class(n.label)?;
        layer.check_dim(&n.key)?;
    }

    let max_logit = logits.iter().copied().fold(T::neg_infinity(), T::max);
    let mut parametric: Vec<T> = logits.iter().map(|&z| (z - max_logit).exp()).collect();

    let mut kernel = vec![T::zero(); logits.len()];
    if !nbrs.is_empty() {
        let scores: Vec<T> = nbrs.iter().map(|n| cfg.theta * dot(&n.key, h)).collect();
        let max_score = scores.iter().copied().fold(T::neg_infinity(), T::max);
        for (n, s) in nbrs.iter().zip(scores) {
            kernel[n.label] += (s - max_score).exp();
        }
    }

    if cfg.normalize_terms {
        normalize(&mut parametric);
        if !nbrs.is_empty() {
            normalize(&mut kernel);
        }
    }

    let mut out: Vec<T> = parametric
        .iter()
        .zip(&kernel)
        .map(|(&p, &k)| (T::one() - cfg.gamma) * p + cfg.gamma * k)
        .collect();
    if out.iter().all(|&v| v == T::zero()) {
        // γ = 1 with no neighbors carries no information
        return Ok(vec![T::one() / T::from_count(out.len()); out.len()]);
    }
    normalize(&mut out);
    Ok(out)
}

fn normalize<T: Real>(v: &mut [T]) {
    let total: T = v.iter().copied().sum();
    for x in v {
        *x /= total;
    }
}

/// Fine-tunes the layer on the incremental data without touching memory.
pub fn parametric_finetune<T: Real>(
    extractor: &FeatureExtractor<T>,
    layer: &mut OutputLayer<T>,
    data: &[LabeledExample<T>],
    cfg: &TrainConfig<T>,
) -> Result<Vec<T>> {
    train(extractor, layer, data, cfg)
}
