//! Meta-learned label generation for implicit-feedback recommendation.
//!
//! A labeling network turns raw feedback (watch time, explicit flags) into
//! training labels for a recommender. Its parameters are updated by
//! differentiating platform objectives, measured on a held-out set after one
//! tentative recommender step, back through that step.

pub mod baselines;
pub mod data;
pub mod error;
pub mod eval;
pub mod model;
pub mod objectives;
pub mod softtopk;
pub mod trainer;

pub use error::{Error, Result};
