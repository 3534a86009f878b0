//! Bi-level training: labeling-model meta-updates through one tentative
//! recommender step, alternated with ordinary recommender updates.

mod fit;
mod prepare;
mod steps;

pub use fit::{run_epochs, train_loop, EpochRun, EpochStepper, HistoryRecord, StopReason, TrainOutcome};
pub use prepare::{fit_scalers, PreparedData, TrainSample};
pub use steps::{
    hypergradient, inner_loss_grad, meta_step, supervised_loss_grad, theta_step, validation_predictions, InnerLoss,
    LossKind, MetaOutcome, SampleTrace,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::EncoderConfig;
use crate::objectives::{ObjectiveConfig, ScaleMode, DEFAULT_BETA};

/// Which raw signals the labeling network may read.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct LabelInputs {
    pub watch_time: bool,
    pub duration: bool,
    pub explicit: bool,
}

impl Default for LabelInputs {
    fn default() -> Self {
        LabelInputs {
            watch_time: true,
            duration: true,
            explicit: true,
        }
    }
}

/// Recommender architecture and feature encoding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RecommenderConfig {
    pub emb_dim: usize,
    pub hidden: Vec<usize>,
    pub interactions: bool,
    pub encoder: EncoderConfig,
}

impl Default for RecommenderConfig {
    fn default() -> Self {
        RecommenderConfig {
            emb_dim: 16,
            hidden: vec![32],
            interactions: true,
            encoder: EncoderConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    /// Recommender learning rate, also used for the tentative step.
    pub eta1: f64,
    /// Labeling-model learning rate (gradient ascent).
    pub eta2: f64,
    /// L2 coefficient on θ.
    pub lambda: f64,
    pub batch_size: usize,
    pub meta_users_per_step: usize,
    pub max_epochs: usize,
    /// Training stops when more than this many consecutive epochs fail to improve.
    pub patience: usize,
    /// Caps batches per epoch; 0 means a full pass over the training part.
    pub max_batches_per_epoch: usize,
    /// Draw a separate batch for the recommender update instead of reusing the meta batch.
    pub fresh_theta_batch: bool,
    pub objective: ObjectiveConfig,
    /// Percentile of the scaling knee.
    pub beta: f64,
    pub scale_mode: ScaleMode,
    pub label_inputs: LabelInputs,
    pub label_hidden: Vec<usize>,
    pub recommender: RecommenderConfig,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            eta1: 0.05,
            eta2: 1.0,
            lambda: 0.0,
            batch_size: 256,
            meta_users_per_step: 32,
            max_epochs: 1000,
            patience: 5,
            max_batches_per_epoch: 0,
            fresh_theta_batch: false,
            objective: ObjectiveConfig::default(),
            beta: DEFAULT_BETA,
            scale_mode: ScaleMode::Piecewise,
            label_inputs: LabelInputs::default(),
            label_hidden: vec![256, 256],
            recommender: RecommenderConfig::default(),
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} must be > 0, got {v}")))
            }
        };
        positive("eta1", self.eta1)?;
        if !(self.eta2 >= 0.0 && self.eta2.is_finite()) {
            return Err(Error::Config(format!("eta2 must be >= 0, got {}", self.eta2)));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::Config(format!("lambda must be >= 0, got {}", self.lambda)));
        }
        if self.batch_size == 0 || self.meta_users_per_step == 0 || self.max_epochs == 0 {
            return Err(Error::Config(
                "batch_size, meta_users_per_step and max_epochs must be >= 1".into(),
            ));
        }
        if !(self.beta > 0.0 && self.beta < 100.0) {
            return Err(Error::Config(format!("beta must be in (0, 100), got {}", self.beta)));
        }
        self.objective.validate()
    }
}
