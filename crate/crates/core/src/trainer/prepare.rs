use crate::data::{group_by_user, DatasetSplit, InteractionRecord};
use crate::error::{Error, Result};
use crate::model::{
    build_label_input, FeatureEncoder, FeedbackScalers, LabelFeatures, LabelInputSpec, LabelingSpec, RawFeedback,
    RecInput, RecommenderSpec,
};
use crate::objectives::{fit_scale, ListItem, ScaleTarget};

use super::TrainConfig;

/// One encoded training interaction.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainSample {
    pub input: RecInput,
    /// Labeling-network input (scaled feedback and features).
    pub label_input: Vec<f64>,
}

/// Encoded training samples and per-user validation lists, ready for the loops.
///
/// `train[i]` corresponds to `train_records[i]`; `val_inputs[u][j]` and
/// `val_lists[u][j]` describe the same validation record.
#[derive(Debug, Clone)]
pub struct PreparedData {
    pub encoder: FeatureEncoder,
    pub scalers: FeedbackScalers,
    pub label_spec: LabelingSpec,
    pub train: Vec<TrainSample>,
    pub train_records: Vec<InteractionRecord>,
    pub val_users: Vec<u64>,
    pub val_inputs: Vec<Vec<RecInput>>,
    pub val_lists: Vec<Vec<ListItem>>,
}

/// Scalers for watch time and duration fitted on the given records.
pub fn fit_scalers(records: &[InteractionRecord], cfg: &TrainConfig) -> Result<FeedbackScalers> {
    let watch: Vec<f64> = records.iter().map(|r| r.watch_time).collect();
    let duration: Vec<f64> = records.iter().map(|r| r.duration).collect();
    Ok(FeedbackScalers {
        watch: fit_scale(&watch, cfg.beta)?
            .on(ScaleTarget::WatchTime)
            .with_mode(cfg.scale_mode),
        duration: fit_scale(&duration, cfg.beta)?
            .on(ScaleTarget::Duration)
            .with_mode(cfg.scale_mode),
    })
}

impl PreparedData {
    /// Fits the encoder on train and the scalers on validation, then encodes both parts.
    pub fn build(split: &DatasetSplit, cfg: &TrainConfig) -> Result<Self> {
        cfg.validate()?;
        if split.train.is_empty() || split.validation.is_empty() {
            return Err(Error::Argument(
                "training needs nonempty train and validation parts".into(),
            ));
        }
        let encoder = FeatureEncoder::fit(&split.train, &split.schema, cfg.recommender.encoder.clone());
        let scalers = fit_scalers(&split.validation, cfg)?;
        let label_spec = LabelingSpec {
            input: LabelInputSpec {
                use_watch_time: cfg.label_inputs.watch_time,
                use_duration: cfg.label_inputs.duration,
                use_explicit: cfg.label_inputs.explicit,
                n_numeric: split.schema.numeric.len(),
            },
            hidden: cfg.label_hidden.clone(),
        };
        let train = split
            .train
            .iter()
            .map(|r| {
                Ok(TrainSample {
                    input: encoder.encode(r),
                    label_input: build_label_input(
                        &label_spec.input,
                        &scalers,
                        &LabelFeatures::from(r),
                        &RawFeedback::from(r),
                    )?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let groups = group_by_user(&split.validation);
        let mut val_users = Vec::with_capacity(groups.len());
        let mut val_inputs = Vec::with_capacity(groups.len());
        let mut val_lists = Vec::with_capacity(groups.len());
        for (user, records) in groups {
            val_users.push(user);
            val_inputs.push(records.iter().map(|r| encoder.encode(r)).collect());
            val_lists.push(records.iter().map(|r| ListItem::from_record(r, &scalers)).collect());
        }
        Ok(PreparedData {
            encoder,
            scalers,
            label_spec,
            train,
            train_records: split.train.clone(),
            val_users,
            val_inputs,
            val_lists,
        })
    }

    pub fn recommender_spec(&self, cfg: &TrainConfig) -> RecommenderSpec {
        let r = &cfg.recommender;
        self.encoder
            .recommender_spec(r.emb_dim, r.hidden.clone(), r.interactions)
    }
}
