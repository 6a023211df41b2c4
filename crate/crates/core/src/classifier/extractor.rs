use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::scalar::{all_finite, Real};

/// Frozen feature extractor producing the representation stored in memory.
#[derive(Debug, Clone, PartialEq)]
pub enum FeatureExtractor<T> {
    /// Raw inputs are the representation.
    Identity { dim: usize },
    /// `h = max(0, P^T x + bias)` with `P` stored row-major as `input_dim x output_dim`.
    RandomProjection {
        input_dim: usize,
        output_dim: usize,
        proj: Vec<T>,
        bias: Vec<T>,
    },
}

impl<T: Real> FeatureExtractor<T> {
    pub fn identity(dim: usize) -> Self {
        FeatureExtractor::Identity { dim }
    }

    /// Draws projection weights and bias from a seeded standard normal scaled
    /// by `1/sqrt(input_dim)`.
    pub fn random_projection(input_dim: usize, output_dim: usize, seed: u64) -> Result<Self> {
        if input_dim == 0 || output_dim == 0 {
            return Err(Error::param(
                "dim",
                "projection dimensions must be positive",
            ));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let scale = 1.0 / (input_dim as f64).sqrt();
        let mut draw = |n: usize| -> Vec<T> {
            (0..n)
                .map(|_| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    T::lit(z * scale)
                })
                .collect()
        };
        let proj = draw(input_dim * output_dim);
        let bias = draw(output_dim);
        Ok(FeatureExtractor::RandomProjection {
            input_dim,
            output_dim,
            proj,
            bias,
        })
    }

    pub fn projection_from_parts(
        input_dim: usize,
        output_dim: usize,
        proj: Vec<T>,
        bias: Vec<T>,
    ) -> Result<Self> {
        if proj.len() != input_dim * output_dim {
            return Err(Error::DimensionMismatch {
                expected: input_dim * output_dim,
                actual: proj.len(),
            });
        }
        if bias.len() != output_dim {
            return Err(Error::DimensionMismatch {
                expected: output_dim,
                actual: bias.len(),
            });
        }
        if !all_finite(&proj) || !all_finite(&bias) {
            return Err(Error::NonFinite("projection parameters"));
        }
        Ok(FeatureExtractor::RandomProjection {
            input_dim,
            output_dim,
            proj,
            bias,
        })
    }

    pub fn input_dim(&self) -> usize {
        match self {
            FeatureExtractor::Identity { dim } => *dim,
            FeatureExtractor::RandomProjection { input_dim, .. } => *input_dim,
        }
    }

    pub fn output_dim(&self) -> usize {
        match self {
            FeatureExtractor::Identity { dim } => *dim,
            FeatureExtractor::RandomProjection { output_dim, .. } => *output_dim,
        }
    }

    /// `h_x = g(x)`.
    pub fn extract(&self, x: &[T]) -> Result<Vec<T>> {
        if x.len() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                actual: x.len(),
            });
        }
        if !all_finite(x) {
            return Err(Error::NonFinite("input"));
        }
        match self {
            FeatureExtractor::Identity { .. } => Ok(x.to_vec()),
            FeatureExtractor::RandomProjection {
                output_dim,
                proj,
                bias,
                ..
            } => {
                let mut h = bias.clone();
                for (i, &xi) in x.iter().enumerate() {
                    let row = &proj[i * output_dim..(i + 1) * output_dim];
                    for (hj, &p) in h.iter_mut().zip(row) {
                        *hj += xi * p;
                    }
                }
                for hj in &mut h {
                    *hj = hj.max(T::zero());
                }
                Ok(h)
            }
        }
    }
}
