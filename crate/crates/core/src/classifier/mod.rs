//! Base classifier: a frozen feature extractor followed by a trainable
//! linear-softmax output layer.

mod extractor;
mod layer;
mod trainer;

pub use extractor::FeatureExtractor;
pub use layer::{LayerGradient, OutputLayer, LAYER_MAGIC};
pub use trainer::{accuracy, train, LabeledExample, TrainConfig};
