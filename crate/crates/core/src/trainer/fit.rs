use std::io::Write;

use log::{debug, info};
use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::steps::{meta_step, theta_step, validation_predictions};
use super::{PreparedData, TrainConfig, TrainSample};
use crate::error::{Error, Result};
use crate::model::{LabelingModel, RecInput, RecommenderModel};
use crate::objectives::{hard_objective, ListItem, ObjectiveBreakdown};

/// One line of the training history.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum HistoryRecord {
    Step {
        epoch: usize,
        step: usize,
        loss: f64,
        /// Soft objective on the meta users at the tentative parameters.
        #[serde(skip_serializing_if = "Option::is_none")]
        objective: Option<ObjectiveBreakdown>,
    },
    /// Hard top-k objective on the whole validation part; epoch 0 is the initial model.
    Epoch {
        epoch: usize,
        validation: ObjectiveBreakdown,
        improved: bool,
    },
}

impl HistoryRecord {
    pub fn write_jsonl<W: Write>(records: &[HistoryRecord], mut w: W) -> Result<()> {
        for r in records {
            serde_json::to_writer(&mut w, r)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    EarlyStopped,
    MaxEpochs,
}

/// Per-method update rule driven by [`run_epochs`].
pub trait EpochStepper {
    /// Performs one update on `batch` and returns the new recommender and its step record fields.
    fn step(
        &mut self,
        rec: &RecommenderModel,
        batch: &[&TrainSample],
        batch_ids: &[usize],
        data: &PreparedData,
        rng: &mut ChaCha8Rng,
    ) -> Result<(RecommenderModel, f64, Option<ObjectiveBreakdown>)>;

    /// Called whenever the current epoch becomes the best so far.
    fn mark_best(&mut self) {}
}

#[derive(Debug, Clone)]
pub struct EpochRun {
    pub recommender: RecommenderModel,
    pub history: Vec<HistoryRecord>,
    pub best_epoch: usize,
    pub epochs_run: usize,
    pub stop_reason: StopReason,
    pub initial_validation: ObjectiveBreakdown,
    pub best_validation: ObjectiveBreakdown,
}

fn validate_model(rec: &RecommenderModel, data: &PreparedData, cfg: &TrainConfig) -> Result<ObjectiveBreakdown> {
    let preds = validation_predictions(rec, data)?;
    let b = hard_objective(&preds, &data.val_lists, &cfg.objective)?;
    if !b.total.is_finite() {
        return Err(Error::Numerical("non-finite validation objective".into()));
    }
    Ok(b)
}

/// Shuffled mini-batch epochs with early stopping on the validation objective.
///
/// Returns the parameters of the best epoch (epoch 0 being the initial model).
pub fn run_epochs<S: EpochStepper>(
    data: &PreparedData,
    cfg: &TrainConfig,
    init: RecommenderModel,
    stepper: &mut S,
    rng: &mut ChaCha8Rng,
) -> Result<EpochRun> {
    if data.train.is_empty() {
        return Err(Error::Argument("empty training part".into()));
    }
    let mut history = Vec::new();
    let initial = validate_model(&init, data, cfg)?;
    history.push(HistoryRecord::Epoch {
        epoch: 0,
        validation: initial,
        improved: true,
    });
    stepper.mark_best();
    let mut best = (init.clone(), 0usize, initial);
    let mut rec = init;
    let mut since_best = 0usize;
    let mut step = 0usize;
    let mut order: Vec<usize> = (0..data.train.len()).collect();
    let mut stop_reason = StopReason::MaxEpochs;
    let mut epochs_run = 0;

    for epoch in 1..=cfg.max_epochs {
        order.shuffle(rng);
        let n_batches = order.len().div_ceil(cfg.batch_size);
        let n_batches = if cfg.max_batches_per_epoch > 0 {
            n_batches.min(cfg.max_batches_per_epoch)
        } else {
            n_batches
        };
        for ids in order.chunks(cfg.batch_size).take(n_batches) {
            let batch: Vec<&TrainSample> = ids.iter().map(|&i| &data.train[i]).collect();
            let (next, loss, objective) = stepper.step(&rec, &batch, ids, data, rng)?;
            if !loss.is_finite() {
                return Err(Error::Numerical(format!(
                    "non-finite loss at epoch {epoch}, step {step}"
                )));
            }
            rec = next;
            step += 1;
            history.push(HistoryRecord::Step {
                epoch,
                step,
                loss,
                objective,
            });
        }
        epochs_run = epoch;
        let val = validate_model(&rec, data, cfg)?;
        let improved = val.total > best.2.total;
        history.push(HistoryRecord::Epoch {
            epoch,
            validation: val,
            improved,
        });
        debug!("epoch {epoch}: validation objective {:.5}", val.total);
        if improved {
            best = (rec.clone(), epoch, val);
            since_best = 0;
            stepper.mark_best();
        } else {
            since_best += 1;
            if since_best > cfg.patience {
                stop_reason = StopReason::EarlyStopped;
                break;
            }
        }
    }
    info!(
        "stopped after {epochs_run} epochs ({stop_reason:?}); best epoch {} with validation objective {:.5}",
        best.1, best.2.total
    );
    Ok(EpochRun {
        recommender: best.0,
        history,
        best_epoch: best.1,
        epochs_run,
        stop_reason,
        initial_validation: initial,
        best_validation: best.2,
    })
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub recommender: RecommenderModel,
    pub labeler: LabelingModel,
    pub history: Vec<HistoryRecord>,
    pub best_epoch: usize,
    pub epochs_run: usize,
    pub stop_reason: StopReason,
    pub initial_validation: ObjectiveBreakdown,
    pub best_validation: ObjectiveBreakdown,
}

/// Validation user groups for one meta step, sampled uniformly without replacement.
fn pick_meta_users(data: &PreparedData, cfg: &TrainConfig, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let n = data.val_inputs.len();
    index::sample(rng, n, cfg.meta_users_per_step.min(n)).into_vec()
}

struct MetaStepper<'a> {
    cfg: &'a TrainConfig,
    labeler: LabelingModel,
    best: LabelingModel,
}

impl EpochStepper for MetaStepper<'_> {
    fn step(
        &mut self,
        rec: &RecommenderModel,
        batch: &[&TrainSample],
        _batch_ids: &[usize],
        data: &PreparedData,
        rng: &mut ChaCha8Rng,
    ) -> Result<(RecommenderModel, f64, Option<ObjectiveBreakdown>)> {
        let picked = pick_meta_users(data, self.cfg, rng);
        let meta_inputs: Vec<&[RecInput]> = picked.iter().map(|&u| data.val_inputs[u].as_slice()).collect();
        let meta_lists: Vec<Vec<ListItem>> = picked.iter().map(|&u| data.val_lists[u].clone()).collect();
        let (labeler, meta) = meta_step(rec, &self.labeler, batch, &meta_inputs, &meta_lists, self.cfg)?;
        self.labeler = labeler;
        let (next, loss) = if self.cfg.fresh_theta_batch {
            let fresh: Vec<&TrainSample> = (0..batch.len())
                .map(|_| &data.train[rng.random_range(0..data.train.len())])
                .collect();
            theta_step(rec, &self.labeler, &fresh, self.cfg)?
        } else {
            theta_step(rec, &self.labeler, batch, self.cfg)?
        };
        debug_assert!(meta.inner.loss.is_finite());
        Ok((next, loss, Some(meta.objective)))
    }

    fn mark_best(&mut self) {
        self.best = self.labeler.clone();
    }
}

/// Full bi-level training from freshly initialized models.
pub fn train_loop(data: &PreparedData, cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let rec = RecommenderModel::init(data.recommender_spec(cfg), &mut rng);
    let labeler = LabelingModel::init(data.label_spec.clone(), &mut rng).with_scalers(data.scalers);
    let mut stepper = MetaStepper {
        cfg,
        best: labeler.clone(),
        labeler,
    };
    let run = run_epochs(data, cfg, rec, &mut stepper, &mut rng)?;
    Ok(TrainOutcome {
        recommender: run.recommender,
        labeler: stepper.best,
        history: run.history,
        best_epoch: run.best_epoch,
        epochs_run: run.epochs_run,
        stop_reason: run.stop_reason,
        initial_validation: run.initial_validation,
        best_validation: run.best_validation,
    })
}
