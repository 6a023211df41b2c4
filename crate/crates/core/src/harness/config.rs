use std::collections::BTreeSet;
use std::fmt;

use crate::adaptation::{AdaptationConfig, AdaptationMode};
use crate::baselines::MixtureConfig;
use crate::classifier::{FeatureExtractor, TrainConfig};
use crate::error::{Error, Result};
use crate::memory::Capacity;
use crate::scalar::Real;
use crate::ClassId;

use super::data::{mix_seed, GaussianBlobs, Imbalance, SyntheticTaskSpec, TaskGenerator};

#[derive(Debug, Clone, PartialEq)]
pub enum ScenarioKind {
    /// Permuted tasks trained one after another; after each task the model is
    /// scored on every task seen so far.
    Continual {
        n_tasks: usize,
        epochs_per_task: usize,
        /// Random training examples stored per task; `None` stores all.
        stored_per_task: Option<usize>,
    },
    /// Pre-train on a class subset, then fine-tune on all classes and score
    /// every `eval_every` epochs.
    Incremental {
        pretrain_classes: BTreeSet<ClassId>,
        incremental_epochs: usize,
        eval_every: usize,
    },
    /// Pre-train on a class subset, then stream the test set once.
    Online {
        pretrain_classes: BTreeSet<ClassId>,
        /// Samples between base-model fine-tuning passes.
        finetune_cadence: usize,
        memory_write: bool,
    },
}

impl ScenarioKind {
    pub fn label(&self) -> &'static str {
        match self {
            ScenarioKind::Continual { .. } => "continual",
            ScenarioKind::Incremental { .. } => "incremental",
            ScenarioKind::Online { .. } => "online",
        }
    }

    /// Classes seen at pre-training. Empty for continual runs.
    pub fn pretrain_classes(&self) -> BTreeSet<ClassId> {
        match self {
            ScenarioKind::Continual { .. } => BTreeSet::new(),
            ScenarioKind::Incremental {
                pretrain_classes, ..
            }
            | ScenarioKind::Online {
                pretrain_classes, ..
            } => pretrain_classes.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExtractorSpec {
    Identity,
    RandomProjection { output_dim: usize, seed: u64 },
}

impl ExtractorSpec {
    pub fn build<T: Real>(&self, input_dim: usize, run_seed: u64) -> Result<FeatureExtractor<T>> {
        match *self {
            ExtractorSpec::Identity => Ok(FeatureExtractor::identity(input_dim)),
            ExtractorSpec::RandomProjection { output_dim, seed } => {
                FeatureExtractor::random_projection(input_dim, output_dim, mix_seed(seed, run_seed))
            }
        }
    }

    pub fn output_dim(&self, input_dim: usize) -> usize {
        match *self {
            ExtractorSpec::Identity => input_dim,
            ExtractorSpec::RandomProjection { output_dim, .. } => output_dim,
        }
    }
}

/// Mini-batch SGD schedule for one training phase.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SgdSettings<T> {
    pub epochs: usize,
    pub lr: T,
    pub batch_size: usize,
}

impl<T: Real> SgdSettings<T> {
    pub fn train_config(&self, seed: u64) -> TrainConfig<T> {
        TrainConfig {
            epochs: self.epochs,
            lr: self.lr,
            batch_size: self.batch_size,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.train_config(0).validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Method<T> {
    Parametric,
    Mixture,
    MbPA,
    Hebb,
    HebbV1,
    HebbV2,
    HebbV3 { weight: T },
}

impl<T: Real> Method<T> {
    /// The adaptation rule used at inference, if any.
    pub fn adaptation_mode(&self) -> Option<AdaptationMode<T>> {
        match *self {
            Method::Parametric => None,
            Method::Mixture => Some(AdaptationMode::MixtureOnly),
            Method::MbPA => Some(AdaptationMode::MbPAOnly),
            Method::Hebb => Some(AdaptationMode::Hebb),
            Method::HebbV1 => Some(AdaptationMode::HebbV1),
            Method::HebbV2 => Some(AdaptationMode::HebbV2),
            Method::HebbV3 { weight } => Some(AdaptationMode::HebbV3 { weight }),
        }
    }

    pub fn uses_memory(&self) -> bool {
        !matches!(self, Method::Parametric)
    }
}

impl<T: Real> fmt::Display for Method<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Method::Parametric => f.write_str("parametric"),
            Method::Mixture => f.write_str("mixture"),
            Method::MbPA => f.write_str("mbpa"),
            Method::Hebb => f.write_str("hebb"),
            Method::HebbV1 => f.write_str("hebb-v1"),
            Method::HebbV2 => f.write_str("hebb-v2"),
            Method::HebbV3 { weight } => write!(f, "hebb-v3:{weight}"),
        }
    }
}

/// Everything needed to reproduce one scenario for one method.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig<T> {
    pub kind: ScenarioKind,
    pub task: SyntheticTaskSpec,
    pub extractor: ExtractorSpec,
    /// Pre-training schedule; continual runs use its `lr` and `batch_size`
    /// with `epochs_per_task` epochs per task.
    pub pretrain: SgdSettings<T>,
    /// Incremental epochs and online fine-tuning passes.
    pub finetune: SgdSettings<T>,
    pub method: Method<T>,
    pub adaptation: AdaptationConfig<T>,
    pub mixture: MixtureConfig<T>,
    pub capacity: Capacity,
    pub seeds: Vec<u64>,
}

/// Tight, closely packed blobs: neighbors sit well inside the kernel scale.
fn compact_blobs() -> GaussianBlobs {
    GaussianBlobs {
        cluster_spread: 0.1,
        mean_scale: 0.15,
        ..GaussianBlobs::default()
    }
}

fn first_classes(n: usize) -> BTreeSet<ClassId> {
    (0..n).collect()
}

impl<T: Real> ScenarioConfig<T> {
    /// Five permuted tasks over ten 16-dimensional blobs.
    pub fn continual_default() -> Self {
        ScenarioConfig {
            kind: ScenarioKind::Continual {
                n_tasks: 5,
                epochs_per_task: 20,
                stored_per_task: Some(250),
            },
            task: SyntheticTaskSpec {
                generator: TaskGenerator::Permuted {
                    base: compact_blobs(),
                    n_tasks: 5,
                    permutation_seeds: vec![11, 12, 13, 14, 15],
                },
                imbalance: Imbalance::Balanced,
            },
            extractor: ExtractorSpec::Identity,
            pretrain: SgdSettings {
                epochs: 20,
                lr: T::lit(0.1),
                batch_size: 32,
            },
            finetune: SgdSettings {
                epochs: 1,
                lr: T::lit(0.1),
                batch_size: 32,
            },
            method: Method::Hebb,
            adaptation: AdaptationConfig {
                lambda: T::lit(0.2),
                steps: 10,
                eta: T::lit(1.5),
                beta: T::lit(0.7),
                ..AdaptationConfig::default()
            },
            mixture: MixtureConfig {
                gamma: T::lit(0.3),
                ..MixtureConfig::default()
            },
            capacity: Capacity::Unbounded,
            seeds: vec![0, 1, 2],
        }
    }

    /// Ten blobs, five of them seen at pre-training, ten incremental epochs.
    pub fn incremental_default() -> Self {
        ScenarioConfig {
            kind: ScenarioKind::Incremental {
                pretrain_classes: first_classes(5),
                incremental_epochs: 10,
                eval_every: 1,
            },
            task: SyntheticTaskSpec {
                generator: TaskGenerator::Blobs(compact_blobs()),
                imbalance: Imbalance::Balanced,
            },
            finetune: SgdSettings {
                epochs: 1,
                lr: T::lit(2.0),
                batch_size: 32,
            },
            adaptation: AdaptationConfig {
                lambda: T::lit(0.2),
                steps: 10,
                eta: T::lit(1.3),
                beta: T::lit(0.7),
                ..AdaptationConfig::default()
            },
            ..Self::continual_default()
        }
    }

    /// Ten blobs, five of them seen at pre-training, test set streamed once
    /// with a fine-tuning pass every 100 samples.
    pub fn online_default() -> Self {
        ScenarioConfig {
            kind: ScenarioKind::Online {
                pretrain_classes: first_classes(5),
                finetune_cadence: 100,
                memory_write: true,
            },
            ..Self::incremental_default()
        }
    }

    pub fn default_for(kind: &str) -> Option<Self> {
        match kind {
            "continual" => Some(Self::continual_default()),
            "incremental" => Some(Self::incremental_default()),
            "online" => Some(Self::online_default()),
            _ => None,
        }
    }

    /// Rejects inconsistent settings before any data is generated.
    pub fn validate(&self) -> Result<()> {
        self.task.validate()?;
        self.pretrain.validate()?;
        self.finetune.validate()?;
        self.adaptation.validate()?;
        self.mixture.validate()?;
        if self.seeds.is_empty() {
            return Err(Error::param("seeds", "at least one seed is required"));
        }
        if let Method::HebbV3 { weight } = self.method {
            if !(weight >= T::zero() && weight <= T::one()) {
                return Err(Error::param("method", "hebb-v3 weight must lie in [0, 1]"));
            }
        }
        if let Capacity::RingBuffer(0) = self.capacity {
            return Err(Error::param(
                "capacity",
                "ring buffer size must be positive",
            ));
        }
        if let ExtractorSpec::RandomProjection { output_dim: 0, .. } = self.extractor {
            return Err(Error::param("extractor.output_dim", "must be positive"));
        }
        let n_classes = self.task.blobs().n_classes;
        match &self.kind {
            ScenarioKind::Continual {
                n_tasks,
                epochs_per_task,
                stored_per_task,
            } => {
                if *stored_per_task == Some(0) {
                    return Err(Error::param("stored_per_task", "must be positive"));
                }
                let TaskGenerator::Permuted {
                    n_tasks: gen_tasks, ..
                } = &self.task.generator
                else {
                    return Err(Error::Config(
                        "continual scenarios need a permuted task generator".into(),
                    ));
                };
                if n_tasks != gen_tasks {
                    return Err(Error::Config(format!(
                        "scenario has {n_tasks} tasks but the generator produces {gen_tasks}"
                    )));
                }
                if *epochs_per_task == 0 {
                    return Err(Error::param("epochs_per_task", "must be positive"));
                }
            }
            ScenarioKind::Incremental {
                pretrain_classes,
                eval_every,
                ..
            }
            | ScenarioKind::Online {
                pretrain_classes,
                finetune_cadence: eval_every,
                ..
            } => {
                if !matches!(self.task.generator, TaskGenerator::Blobs(_)) {
                    return Err(Error::Config(format!(
                        "{} scenarios need a plain blob generator",
                        self.kind.label()
                    )));
                }
                if pretrain_classes.is_empty() {
                    return Err(Error::param("pretrain_classes", "must not be empty"));
                }
                if let Some(&c) = pretrain_classes.iter().find(|&&c| c >= n_classes) {
                    return Err(Error::UnknownClass {
                        class: c,
                        n_classes,
                    });
                }
                if *eval_every == 0 {
                    return Err(Error::param(
                        if matches!(self.kind, ScenarioKind::Online { .. }) {
                            "finetune_cadence"
                        } else {
                            "eval_every"
                        },
                        "must be positive",
                    ));
                }
            }
        }
        Ok(())
    }
}
