//! Seeded synthetic classification tasks.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::classifier::LabeledExample;
use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::ClassId;

/// Isotropic Gaussian clusters, one per class, with means drawn from
/// `N(0, mean_scale^2 I)` and points from `N(mean, cluster_spread^2 I)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianBlobs {
    pub n_classes: usize,
    pub input_dim: usize,
    /// Training points per class.
    pub per_class_count: usize,
    /// Held-out points per class.
    pub test_per_class: usize,
    pub cluster_spread: f64,
    pub mean_scale: f64,
    pub seed: u64,
}

impl Default for GaussianBlobs {
    fn default() -> Self {
        GaussianBlobs {
            n_classes: 10,
            input_dim: 16,
            per_class_count: 100,
            test_per_class: 50,
            cluster_spread: 1.0,
            mean_scale: 1.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TaskGenerator {
    Blobs(GaussianBlobs),
    /// The same blobs seen through `n_tasks` fixed coordinate permutations.
    Permuted {
        base: GaussianBlobs,
        n_tasks: usize,
        permutation_seeds: Vec<u64>,
    },
}

/// Class imbalance applied to the new-class half of the incremental
/// training data.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Imbalance {
    Balanced,
    /// The first half of the new classes keeps every sample, the second half
    /// keeps `minor / major` of them.
    Ratio {
        major: u32,
        minor: u32,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticTaskSpec {
    pub generator: TaskGenerator,
    pub imbalance: Imbalance,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset<T> {
    pub train: Vec<LabeledExample<T>>,
    pub test: Vec<LabeledExample<T>>,
}

/// Deterministic 64-bit mixing of two seeds (splitmix64 finalizer).
pub fn mix_seed(a: u64, b: u64) -> u64 {
    let mut z = a ^ b.wrapping_mul(0x9E37_79B9_7F4A_7C15).rotate_left(17);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl GaussianBlobs {
    pub fn validate(&self) -> Result<()> {
        if self.n_classes < 2 {
            return Err(Error::param("n_classes", "need at least two classes"));
        }
        if self.input_dim == 0 {
            return Err(Error::param("input_dim", "must be positive"));
        }
        if self.per_class_count == 0 || self.test_per_class == 0 {
            return Err(Error::param(
                "per_class_count",
                "sample counts must be positive",
            ));
        }
        if !(self.cluster_spread > 0.0) || !self.cluster_spread.is_finite() {
            return Err(Error::param("cluster_spread", "must be positive"));
        }
        if !(self.mean_scale >= 0.0) || !self.mean_scale.is_finite() {
            return Err(Error::param("mean_scale", "must be non-negative"));
        }
        Ok(())
    }

    /// Train and test sets for `run_seed`, ordered by class.
    pub fn generate<T: Real>(&self, run_seed: u64) -> Dataset<T> {
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(self.seed, run_seed));
        let mut normal = || -> f64 { StandardNormal.sample(&mut rng) };
        let means: Vec<Vec<f64>> = (0..self.n_classes)
            .map(|_| {
                (0..self.input_dim)
                    .map(|_| self.mean_scale * normal())
                    .collect()
            })
            .collect();
        let mut sample = |count: usize| -> Vec<LabeledExample<T>> {
            let mut out = Vec::with_capacity(count * self.n_classes);
            for (class, mean) in means.iter().enumerate() {
                for _ in 0..count {
                    let x = mean
                        .iter()
                        .map(|&m| T::lit(m + self.cluster_spread * normal()))
                        .collect();
                    out.push(LabeledExample::new(x, class));
                }
            }
            out
        };
        let train = sample(self.per_class_count);
        let test = sample(self.test_per_class);
        Dataset { train, test }
    }
}

/// A uniformly random permutation of `0..dim`.
pub fn permutation(dim: usize, seed: u64) -> Vec<usize> {
    let mut perm: Vec<usize> = (0..dim).collect();
    perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    perm
}

/// `out[j] = x[perm[j]]`.
pub fn permute<T: Copy>(x: &[T], perm: &[usize]) -> Vec<T> {
    perm.iter().map(|&i| x[i]).collect()
}

fn permute_all<T: Real>(data: &[LabeledExample<T>], perm: &[usize]) -> Vec<LabeledExample<T>> {
    data.iter()
        .map(|ex| LabeledExample::new(permute(&ex.x, perm), ex.y))
        .collect()
}

impl SyntheticTaskSpec {
    pub fn blobs(&self) -> &GaussianBlobs {
        match &self.generator {
            TaskGenerator::Blobs(b) => b,
            TaskGenerator::Permuted { base, .. } => base,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.blobs().validate()?;
        if let TaskGenerator::Permuted {
            n_tasks,
            permutation_seeds,
            ..
        } = &self.generator
        {
            if *n_tasks == 0 {
                return Err(Error::param("n_tasks", "must be positive"));
            }
            if permutation_seeds.len() < *n_tasks {
                return Err(Error::param(
                    "permutation_seeds",
                    format!("need {n_tasks} seeds, got {}", permutation_seeds.len()),
                ));
            }
        }
        if let Imbalance::Ratio { major, minor } = self.imbalance {
            if minor == 0 || major < minor {
                return Err(Error::param(
                    "imbalance",
                    "ratio must satisfy major >= minor > 0",
                ));
            }
        }
        Ok(())
    }

    /// One dataset per task. Plain blobs yield a single task.
    pub fn generate_tasks<T: Real>(&self, run_seed: u64) -> Vec<Dataset<T>> {
        match &self.generator {
            TaskGenerator::Blobs(b) => vec![b.generate(run_seed)],
            TaskGenerator::Permuted {
                base,
                n_tasks,
                permutation_seeds,
            } => {
                let data = base.generate::<T>(run_seed);
                permutation_seeds[..*n_tasks]
                    .iter()
                    .map(|&s| {
                        let perm = permutation(base.input_dim, mix_seed(s, run_seed));
                        Dataset {
                            train: permute_all(&data.train, &perm),
                            test: permute_all(&data.test, &perm),
                        }
                    })
                    .collect()
            }
        }
    }
}

/// Drops samples from the minor half of `new_classes` according to `imbalance`.
/// Sample order is preserved.
pub fn apply_imbalance<T: Clone>(
    data: &[LabeledExample<T>],
    new_classes: &BTreeSet<ClassId>,
    imbalance: Imbalance,
) -> Vec<LabeledExample<T>> {
    let Imbalance::Ratio { major, minor } = imbalance else {
        return data.to_vec();
    };
    let ordered: Vec<ClassId> = new_classes.iter().copied().collect();
    let minor_half: BTreeSet<ClassId> = ordered[ordered.len().div_ceil(2)..]
        .iter()
        .copied()
        .collect();
    let mut seen = std::collections::BTreeMap::<ClassId, usize>::new();
    let per_class = |class: ClassId| data.iter().filter(|ex| ex.y == class).count();
    let keep_of = |class: ClassId| -> usize {
        let total = per_class(class);
        ((total * minor as usize) / major as usize).max(1)
    };
    let limits: std::collections::BTreeMap<ClassId, usize> =
        minor_half.iter().map(|&c| (c, keep_of(c))).collect();
    data.iter()
        .filter(|ex| match limits.get(&ex.y) {
            None => true,
            Some(&limit) => {
                let n = seen.entry(ex.y).or_insert(0);
                *n += 1;
                *n <= limit
            }
        })
        .cloned()
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::squared_distance;

    fn blobs() -> GaussianBlobs {
        GaussianBlobs {
            n_classes: 4,
            input_dim: 6,
            per_class_count: 10,
            test_per_class: 5,
            ..GaussianBlobs::default()
        }
    }

    #[test]
    fn shapes_and_determinism() {
        let a = blobs().generate::<f64>(3);
        assert_eq!(a.train.len(), 40);
        assert_eq!(a.test.len(), 20);
        assert!(a.train.iter().all(|e| e.x.len() == 6 && e.y < 4));
        assert_eq!(a, blobs().generate::<f64>(3));
        assert_ne!(a, blobs().generate::<f64>(4));
    }

    #[test]
    fn permutations_are_bijections_and_isometries() {
        let perm = permutation(16, 9);
        let mut sorted = perm.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, (0..16).collect::<Vec<_>>());

        let spec = SyntheticTaskSpec {
            generator: TaskGenerator::Permuted {
                base: blobs(),
                n_tasks: 3,
                permutation_seeds: vec![1, 2, 3],
            },
            imbalance: Imbalance::Balanced,
        };
        let tasks = spec.generate_tasks::<f64>(5);
        assert_eq!(tasks.len(), 3);
        for task in &tasks[1..] {
            for i in 0..10 {
                for j in (i + 1)..10 {
                    let d0 = squared_distance(&tasks[0].train[i].x, &tasks[0].train[j].x);
                    let dt = squared_distance(&task.train[i].x, &task.train[j].x);
                    assert!((d0 - dt).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn imbalance_thins_minor_half() {
        let data = blobs().generate::<f64>(0).train;
        let new: BTreeSet<ClassId> = [2, 3].into();
        let out = apply_imbalance(&data, &new, Imbalance::Ratio { major: 2, minor: 1 });
        let count = |c| out.iter().filter(|e| e.y == c).count();
        assert_eq!((count(0), count(1), count(2), count(3)), (10, 10, 10, 5));
        let out = apply_imbalance(&data, &new, Imbalance::Ratio { major: 5, minor: 1 });
        assert_eq!(out.iter().filter(|e| e.y == 3).count(), 2);
        assert_eq!(apply_imbalance(&data, &new, Imbalance::Balanced), data);
    }

    #[test]
    fn validation() {
        let mut b = blobs();
        b.cluster_spread = 0.0;
        assert!(b.validate().is_err());
        let spec = SyntheticTaskSpec {
            generator: TaskGenerator::Permuted {
                base: blobs(),
                n_tasks: 3,
                permutation_seeds: vec![1],
            },
            imbalance: Imbalance::Balanced,
        };
        assert!(spec.validate().is_err());
    }
}
