use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{FeatureExtractor, OutputLayer};
use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::ClassId;

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledExample<T> {
    pub x: Vec<T>,
    pub y: ClassId,
}

impl<T> LabeledExample<T> {
    pub fn new(x: Vec<T>, y: ClassId) -> Self {
        LabeledExample { x, y }
    }
}

/// Mini-batch SGD settings for the output layer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig<T> {
    pub epochs: usize,
    pub lr: T,
    pub batch_size: usize,
    pub seed: u64,
}

impl<T: Real> TrainConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr > T::zero()) || !self.lr.is_finite() {
            return Err(Error::param("lr", "must be positive and finite"));
        }
        if self.batch_size == 0 {
            return Err(Error::param("batch_size", "must be positive"));
        }
        Ok(())
    }
}

/// Trains `layer` on features of `data` with mini-batch SGD on cross-entropy.
///
/// Each epoch reshuffles with a generator seeded from `cfg.seed`, so the run
/// is deterministic. Returns the mean training loss of every epoch.
pub fn train<T: Real>(
    extractor: &FeatureExtractor<T>,
    layer: &mut OutputLayer<T>,
    data: &[LabeledExample<T>],
    cfg: &TrainConfig<T>,
) -> Result<Vec<T>> {
    if data.is_empty() {
        return Err(Error::EmptyData);
    }
    cfg.validate()?;
    if extractor.output_dim() != layer.dim() {
        return Err(Error::DimensionMismatch {
            expected: layer.dim(),
            actual: extractor.output_dim(),
        });
    }
    let features = data
        .iter()
        .map(|ex| {
            layer.check_class(ex.y)?;
            extractor.extract(&ex.x)
        })
        .collect::<Result<Vec<_>>>()?;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut losses = Vec::with_capacity(cfg.epochs);
    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = T::zero();
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<(&[T], ClassId)> = chunk
                .iter()
                .map(|&i| (features[i].as_slice(), data[i].y))
                .collect();
            let (loss, grad) = layer.cross_entropy_grad(&batch)?;
            epoch_loss += loss * T::from_count(chunk.len());
            layer.apply_gradient(&grad, cfg.lr);
        }
        losses.push(epoch_loss / T::from_count(data.len()));
    }
    Ok(losses)
}

/// Fraction of `data` the unadapted classifier labels correctly.
pub fn accuracy<T: Real>(
    extractor: &FeatureExtractor<T>,
    layer: &OutputLayer<T>,
    data: &[LabeledExample<T>],
) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::EmptyData);
    }
    let mut correct = 0usize;
    for ex in data {
        let h = extractor.extract(&ex.x)?;
        if layer.predict(&h)? == ex.y {
            correct += 1;
        }
    }
    Ok(correct as f64 / data.len() as f64)
}
