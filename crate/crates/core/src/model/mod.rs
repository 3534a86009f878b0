//! Recommender and labeling networks with hand-derived gradients.

mod checkpoint;
mod encoder;
mod labeling;
mod mlp;
mod params;
mod recommender;

pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, CheckpointManifest};
pub use encoder::{EncoderConfig, FeatureEncoder};
pub use labeling::{
    build_label_input, labeling_forward, labeling_param_grad, sigmoid, FeedbackScalers, LabelFeatures, LabelInputSpec,
    LabelingModel, LabelingSpec, RawFeedback,
};
pub use params::{sgd_step, Layout, ParamBlock, ParamVector, SparseGrad};
pub use recommender::{recommender_forward, recommender_param_grad, RecInput, RecommenderModel, RecommenderSpec};
