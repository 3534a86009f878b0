//! Labeling model `g_φ`: maps features and raw feedback to a crafted label in (0, 1).

use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::mlp::Mlp;
use super::params::{Layout, ParamVector};
use crate::data::{InteractionRecord, N_EXPLICIT};
use crate::error::{Error, Result};
use crate::objectives::ScaleParams;

/// Which inputs the labeling model sees.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelInputSpec {
    pub use_watch_time: bool,
    pub use_duration: bool,
    pub use_explicit: bool,
    /// Numeric side features passed through unchanged.
    pub n_numeric: usize,
}

impl Default for LabelInputSpec {
    fn default() -> Self {
        LabelInputSpec {
            use_watch_time: true,
            use_duration: true,
            use_explicit: true,
            n_numeric: 0,
        }
    }
}

impl LabelInputSpec {
    pub fn dim(&self) -> usize {
        usize::from(self.use_duration)
            + self.n_numeric
            + usize::from(self.use_watch_time)
            + if self.use_explicit { N_EXPLICIT } else { 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelingSpec {
    pub input: LabelInputSpec,
    pub hidden: Vec<usize>,
}

impl Default for LabelingSpec {
    fn default() -> Self {
        LabelingSpec {
            input: LabelInputSpec::default(),
            hidden: vec![256, 256],
        }
    }
}

/// Feature part of the labeling input.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelFeatures {
    pub duration: f64,
    pub numeric: Vec<f64>,
}

/// Raw feedback `y^r`.
#[derive(Debug, Clone, PartialEq)]
pub struct RawFeedback {
    pub watch_time: f64,
    pub explicit: [u8; N_EXPLICIT],
}

impl From<&InteractionRecord> for LabelFeatures {
    fn from(r: &InteractionRecord) -> Self {
        LabelFeatures {
            duration: r.duration,
            numeric: r.features.numeric.clone(),
        }
    }
}

impl From<&InteractionRecord> for RawFeedback {
    fn from(r: &InteractionRecord) -> Self {
        RawFeedback {
            watch_time: r.watch_time,
            explicit: r.explicit,
        }
    }
}

/// Watch-time and duration scalers used to normalize labeling inputs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeedbackScalers {
    pub watch: ScaleParams,
    pub duration: ScaleParams,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabelingModel {
    pub spec: LabelingSpec,
    pub params: ParamVector,
    pub scalers: Option<FeedbackScalers>,
    mlp: Mlp,
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl LabelingModel {
    fn layout_for(spec: &LabelingSpec) -> (Layout, Mlp) {
        let mut layout = Layout::new();
        let mut sizes = vec![spec.input.dim()];
        sizes.extend(&spec.hidden);
        sizes.push(1);
        let mlp = Mlp::register(&mut layout, "label", &sizes);
        (layout, mlp)
    }

    pub fn zeros(spec: LabelingSpec) -> Self {
        let (layout, mlp) = Self::layout_for(&spec);
        LabelingModel {
            params: ParamVector::zeros(Arc::new(layout)),
            spec,
            scalers: None,
            mlp,
        }
    }

    pub fn init<R: Rng>(spec: LabelingSpec, rng: &mut R) -> Self {
        let mut m = Self::zeros(spec);
        m.params = ParamVector::glorot(m.params.layout.clone(), rng);
        m
    }

    pub fn with_scalers(mut self, scalers: FeedbackScalers) -> Self {
        self.scalers = Some(scalers);
        self
    }

    pub fn with_params(&self, params: ParamVector) -> Result<Self> {
        if !params.same_layout(&self.params) {
            return Err(Error::Shape("labeling parameter layout mismatch".into()));
        }
        Ok(LabelingModel { params, ..self.clone() })
    }

    /// Assembles the network input: `[scale(x_d)?, numeric.., scale(y_w)?, y_e?]`.
    pub fn build_input(&self, x: &LabelFeatures, y: &RawFeedback) -> Result<Vec<f64>> {
        let scalers = self
            .scalers
            .as_ref()
            .ok_or_else(|| Error::State("labeling model used before scalers were fitted".into()))?;
        build_label_input(&self.spec.input, scalers, x, y)
    }

    /// Pre-sigmoid network output for an assembled input.
    pub fn logit(&self, input: &[f64]) -> f64 {
        self.mlp
            .forward(&self.params.values, input)
            .last()
            .expect("output layer")[0]
    }

    pub fn forward_input(&self, input: &[f64]) -> f64 {
        sigmoid(self.logit(input))
    }

    pub fn forward(&self, x: &LabelFeatures, y: &RawFeedback) -> Result<f64> {
        Ok(self.forward_input(&self.build_input(x, y)?))
    }

    /// Adds `upstream * ∂y_c/∂φ` into `grad` (dense, full φ length) and returns `y_c`.
    pub fn accumulate_grad(&self, input: &[f64], upstream: f64, grad: &mut [f64]) -> f64 {
        let acts = self.mlp.forward(&self.params.values, input);
        let y = sigmoid(acts.last().expect("output layer")[0]);
        let range = self.mlp.param_range();
        self.mlp
            .backward(&self.params.values, &acts, &[y * (1.0 - y)], upstream, &mut grad[range]);
        y
    }

    pub fn param_grad(&self, x: &LabelFeatures, y: &RawFeedback) -> Result<ParamVector> {
        let input = self.build_input(x, y)?;
        let mut g = ParamVector::zeros(self.params.layout.clone());
        self.accumulate_grad(&input, 1.0, &mut g.values);
        Ok(g)
    }
}

/// Labeling-network input for one sample, independent of the network parameters.
pub fn build_label_input(
    spec: &LabelInputSpec,
    scalers: &FeedbackScalers,
    x: &LabelFeatures,
    y: &RawFeedback,
) -> Result<Vec<f64>> {
    if x.numeric.len() != spec.n_numeric {
        return Err(Error::Shape(format!(
            "{} numeric features, expected {}",
            x.numeric.len(),
            spec.n_numeric
        )));
    }
    let mut v = Vec::with_capacity(spec.dim());
    if spec.use_duration {
        v.push(scalers.duration.apply(x.duration));
    }
    v.extend_from_slice(&x.numeric);
    if spec.use_watch_time {
        v.push(scalers.watch.apply(y.watch_time));
    }
    if spec.use_explicit {
        v.extend(y.explicit.iter().map(|&f| f64::from(f)));
    }
    Ok(v)
}

pub fn labeling_forward(model: &LabelingModel, x: &LabelFeatures, y: &RawFeedback) -> Result<f64> {
    model.forward(x, y)
}

pub fn labeling_param_grad(model: &LabelingModel, x: &LabelFeatures, y: &RawFeedback) -> Result<ParamVector> {
    model.param_grad(x, y)
}
