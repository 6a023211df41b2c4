//! Episodic memory with Hebbian and gradient-based local adaptation of a
//! softmax output layer.
//!
//! A trained classifier is augmented with an episodic key-value memory of
//! input representations. At inference the `k` nearest stored
//! representations are retrieved and used to compute a transient update of
//! the output layer:
//!
//! * a Hebbian update that writes closeness-weighted neighbor
//!   representations directly into the weight columns of their classes,
//! * an MbPA update that takes gradient steps on the closeness-weighted
//!   log-likelihood of the neighbors,
//! * a per-class blend of the two whose weight decays with how often the
//!   class has been stored.
//!
//! The numerical core is generic over [`Real`] (`f32` or `f64`); the aliases
//! at the crate root fix the scalar for the common cases.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod adaptation;
pub mod baselines;
pub mod classifier;
mod codec;
pub mod error;
pub mod harness;
pub mod memory;
pub mod scalar;
pub mod verify;

/// Class label; doubles as the column index in the output layer.
pub type ClassId = usize;

pub use adaptation::{
    adapted_predict, decompose_mbpa, dynamic_weight, hebbian_update, mbpa_loss, mbpa_update,
    mixed_update, AdaptationConfig, AdaptationDelta, AdaptationMode, ClassDelta,
};
pub use baselines::{mixture_predict, parametric_finetune, MixtureConfig};
pub use classifier::{FeatureExtractor, LabeledExample, OutputLayer, TrainConfig};
pub use error::{DecodeError, Error, Result};
pub use memory::{Capacity, EpisodicMemory, MemoryEntry, Neighbor, Neighborhood};
pub use scalar::Real;

pub type EpisodicMemory64 = EpisodicMemory<f64>;
pub type EpisodicMemory32 = EpisodicMemory<f32>;
pub type Neighborhood64 = Neighborhood<f64>;
pub type OutputLayer64 = OutputLayer<f64>;
pub type OutputLayer32 = OutputLayer<f32>;
pub type FeatureExtractor64 = FeatureExtractor<f64>;
pub type AdaptationDelta64 = AdaptationDelta<f64>;
pub type AdaptationConfig64 = AdaptationConfig<f64>;
pub type MixtureConfig64 = MixtureConfig<f64>;
