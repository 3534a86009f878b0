use serde::{Deserialize, Serialize};

use super::{PreparedData, TrainConfig, TrainSample};
use crate::error::{Error, Result};
use crate::model::{sgd_step, sigmoid, LabelingModel, ParamVector, RecInput, RecommenderModel, SparseGrad};
use crate::objectives::{objective_pred_grads, ListItem, ObjectiveBreakdown};

/// Loss used to fit the recommender to its labels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    /// Squared error on the raw score.
    #[default]
    Mse,
    /// Cross-entropy on `sigmoid(score)`, for binary labels.
    Bce,
}

/// Per-sample quantities from the inner loss, kept for the hypergradient.
#[derive(Debug, Clone)]
pub struct SampleTrace {
    pub label: f64,
    pub pred: f64,
    /// `∇θ f_θ(x)` at the pre-update θ.
    pub grad: SparseGrad,
}

#[derive(Debug, Clone)]
pub struct InnerLoss {
    pub loss: f64,
    pub grad: ParamVector,
    pub samples: Vec<SampleTrace>,
}

/// Batch loss and its θ-gradient for fixed labels, including `λ‖θ‖²`.
pub fn supervised_loss_grad(
    rec: &RecommenderModel,
    inputs: &[&RecInput],
    labels: &[f64],
    loss: LossKind,
    lambda: f64,
) -> Result<InnerLoss> {
    if inputs.is_empty() {
        return Err(Error::Argument("empty training batch".into()));
    }
    if inputs.len() != labels.len() {
        return Err(Error::Shape(format!(
            "{} inputs for {} labels",
            inputs.len(),
            labels.len()
        )));
    }
    let b = inputs.len() as f64;
    let mut grad = ParamVector::zeros(rec.params.layout.clone());
    let mut total = 0.0;
    let mut samples = Vec::with_capacity(inputs.len());
    for (x, &y) in inputs.iter().zip(labels) {
        let (pred, g) = rec.forward_with_grad(x)?;
        let (l, dl) = match loss {
            LossKind::Mse => ((pred - y).powi(2), 2.0 * (pred - y)),
            LossKind::Bce => {
                // log(1 + e^f) - y f, written to stay finite for large |f|.
                let softplus = pred.max(0.0) + (-pred.abs()).exp().ln_1p();
                (softplus - y * pred, sigmoid(pred) - y)
            }
        };
        total += l;
        g.add_to(dl / b, &mut grad.values);
        samples.push(SampleTrace {
            label: y,
            pred,
            grad: g,
        });
    }
    let mut loss_value = total / b;
    if lambda > 0.0 {
        loss_value += lambda * rec.params.norm_sq();
        grad.axpy(2.0 * lambda, &rec.params)?;
    }
    if !loss_value.is_finite() {
        return Err(Error::Numerical(format!("non-finite training loss {loss_value}")));
    }
    Ok(InnerLoss {
        loss: loss_value,
        grad,
        samples,
    })
}

/// MSE of the recommender against labels crafted by `labeler`, plus `λ‖θ‖²`.
pub fn inner_loss_grad(
    rec: &RecommenderModel,
    labeler: &LabelingModel,
    batch: &[&TrainSample],
    lambda: f64,
) -> Result<InnerLoss> {
    let labels: Vec<f64> = batch.iter().map(|s| labeler.forward_input(&s.label_input)).collect();
    let inputs: Vec<&RecInput> = batch.iter().map(|s| &s.input).collect();
    supervised_loss_grad(rec, &inputs, &labels, LossKind::Mse, lambda)
}

#[derive(Debug, Clone)]
pub struct MetaOutcome {
    /// Soft objective at the tentative parameters θ′.
    pub objective: ObjectiveBreakdown,
    /// `∇φ M`.
    pub grad_phi: ParamVector,
    pub inner: InnerLoss,
}

/// Hypergradient of the held-out objective w.r.t. φ through one tentative SGD step on θ.
pub fn hypergradient(
    rec: &RecommenderModel,
    labeler: &LabelingModel,
    batch: &[&TrainSample],
    meta_inputs: &[&[RecInput]],
    meta_lists: &[Vec<ListItem>],
    cfg: &TrainConfig,
) -> Result<MetaOutcome> {
    let inner = inner_loss_grad(rec, labeler, batch, cfg.lambda)?;
    let tentative = rec.with_params(sgd_step(&rec.params, &inner.grad, cfg.eta1)?)?;

    let mut preds = Vec::with_capacity(meta_inputs.len());
    let mut pred_grads = Vec::with_capacity(meta_inputs.len());
    for inputs in meta_inputs {
        let mut p = Vec::with_capacity(inputs.len());
        let mut g = Vec::with_capacity(inputs.len());
        for x in inputs.iter() {
            let (score, grad) = tentative.forward_with_grad(x)?;
            p.push(score);
            g.push(grad);
        }
        preds.push(p);
        pred_grads.push(g);
    }
    let (objective, d_pred) = objective_pred_grads(&preds, meta_lists, &cfg.objective)?;

    let mut d_theta = vec![0.0; rec.params.len()];
    for (grads, dp) in pred_grads.iter().zip(&d_pred) {
        for (g, &d) in grads.iter().zip(dp) {
            if d != 0.0 {
                g.add_to(d, &mut d_theta);
            }
        }
    }

    // ∂θ′/∂y_c(x) = (2 η1 / |B|) ∇θ f_θ(x) for the MSE inner loss.
    let coef = 2.0 * cfg.eta1 / batch.len() as f64;
    let mut grad_phi = ParamVector::zeros(labeler.params.layout.clone());
    for (s, trace) in batch.iter().zip(&inner.samples) {
        let c = coef * trace.grad.dot(&d_theta);
        if c != 0.0 {
            labeler.accumulate_grad(&s.label_input, c, &mut grad_phi.values);
        }
    }
    Ok(MetaOutcome {
        objective,
        grad_phi,
        inner,
    })
}

/// Gradient-ascent update of φ; θ is left untouched.
pub fn meta_step(
    rec: &RecommenderModel,
    labeler: &LabelingModel,
    batch: &[&TrainSample],
    meta_inputs: &[&[RecInput]],
    meta_lists: &[Vec<ListItem>],
    cfg: &TrainConfig,
) -> Result<(LabelingModel, MetaOutcome)> {
    let out = hypergradient(rec, labeler, batch, meta_inputs, meta_lists, cfg)?;
    let phi = sgd_step(&labeler.params, &out.grad_phi, -cfg.eta2)?;
    if !phi.is_finite() {
        return Err(Error::Numerical("labeling parameters became non-finite".into()));
    }
    Ok((labeler.with_params(phi)?, out))
}

/// Recommender update on labels recomputed with the current labeling model.
pub fn theta_step(
    rec: &RecommenderModel,
    labeler: &LabelingModel,
    batch: &[&TrainSample],
    cfg: &TrainConfig,
) -> Result<(RecommenderModel, f64)> {
    let inner = inner_loss_grad(rec, labeler, batch, cfg.lambda)?;
    Ok((
        rec.with_params(sgd_step(&rec.params, &inner.grad, cfg.eta1)?)?,
        inner.loss,
    ))
}

/// Validation predictions for every user in `data`.
pub fn validation_predictions(rec: &RecommenderModel, data: &PreparedData) -> Result<Vec<Vec<f64>>> {
    data.val_inputs
        .iter()
        .map(|inputs| inputs.iter().map(|x| rec.forward(x)).collect())
        .collect()
}
