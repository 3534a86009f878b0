//! Data loading, per-method training and evaluation shared by every command.

use anyhow::Context;
use labelcraft::baselines::{train_with_rule, LabelRule};
use labelcraft::data::{
    chronological_split, generate_synthetic, kcore_filter, load_interactions, Dataset, DatasetSplit,
};
use labelcraft::eval::{evaluate, log_duration_edges, MetricsReport};
use labelcraft::model::{FeatureEncoder, LabelingModel, RecommenderModel};
use labelcraft::objectives::ObjectiveBreakdown;
use labelcraft::trainer::{train_loop, HistoryRecord, PreparedData, StopReason, TrainConfig};
use log::info;

use crate::config::{ExperimentConfig, Method};
use crate::variant::Variant;

/// Loads the configured CSV (k-core filtered when requested) or generates synthetic data.
pub fn load_dataset(cfg: &ExperimentConfig) -> anyhow::Result<Dataset> {
    let mut ds = match &cfg.data.path {
        Some(path) => load_interactions(path, &cfg.data.columns)
            .with_context(|| format!("cannot load interactions from {}", path.display()))?,
        None => generate_synthetic(&cfg.data.synthetic)?,
    };
    let [ku, ki] = cfg.data.kcore;
    if ku > 0 || ki > 0 {
        let before = ds.records.len();
        ds.records = kcore_filter(&ds.records, ku, ki);
        info!(
            "k-core filter ({ku}, {ki}) kept {} of {before} records",
            ds.records.len()
        );
    }
    Ok(ds)
}

pub fn load_split(cfg: &ExperimentConfig) -> anyhow::Result<DatasetSplit> {
    let ds = load_dataset(cfg)?;
    let s = &cfg.split;
    let split = chronological_split(&ds, s.train_days, s.val_days, s.test_days)?;
    info!(
        "split: {} train, {} validation, {} test records",
        split.train.len(),
        split.validation.len(),
        split.test.len()
    );
    Ok(split)
}

/// Training configuration with the variant's modification applied.
pub fn train_config(cfg: &ExperimentConfig, variant: Variant) -> TrainConfig {
    let mut t = cfg.train.clone();
    variant.apply(&mut t);
    t
}

/// Result of training one method on one split.
#[derive(Debug, Clone)]
pub struct MethodRun {
    pub method: Method,
    pub variant: Variant,
    pub encoder: FeatureEncoder,
    pub recommender: RecommenderModel,
    /// Present for LabelCraft only.
    pub labeler: Option<LabelingModel>,
    pub history: Vec<HistoryRecord>,
    pub best_epoch: usize,
    pub epochs_run: usize,
    pub stop_reason: StopReason,
    pub best_validation: ObjectiveBreakdown,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct RunSummary {
    pub method: String,
    pub variant: String,
    pub best_epoch: usize,
    pub epochs_run: usize,
    pub stop_reason: StopReason,
    pub best_validation: ObjectiveBreakdown,
}

impl MethodRun {
    pub fn summary(&self) -> RunSummary {
        RunSummary {
            method: self.method.name().into(),
            variant: self.variant.name().into(),
            best_epoch: self.best_epoch,
            epochs_run: self.epochs_run,
            stop_reason: self.stop_reason,
            best_validation: self.best_validation,
        }
    }
}

/// Trains `method` under `variant`; variants only affect LabelCraft.
pub fn train_method(
    split: &DatasetSplit,
    cfg: &ExperimentConfig,
    method: Method,
    variant: Variant,
) -> anyhow::Result<MethodRun> {
    let tcfg = train_config(cfg, variant);
    let data = PreparedData::build(split, &tcfg)?;
    info!("training {method} ({variant})");
    let run = match method {
        Method::LabelCraft => {
            let out = train_loop(&data, &tcfg)?;
            MethodRun {
                method,
                variant,
                encoder: data.encoder,
                recommender: out.recommender,
                labeler: Some(out.labeler),
                history: out.history,
                best_epoch: out.best_epoch,
                epochs_run: out.epochs_run,
                stop_reason: out.stop_reason,
                best_validation: out.best_validation,
            }
        }
        Method::Rule(kind) => {
            let out = train_with_rule(LabelRule::new(kind), &data, &tcfg)?;
            MethodRun {
                method,
                variant,
                encoder: data.encoder,
                recommender: out.recommender,
                labeler: None,
                history: out.history,
                best_epoch: out.best_epoch,
                epochs_run: out.epochs_run,
                stop_reason: out.stop_reason,
                best_validation: out.best_validation,
            }
        }
    };
    info!(
        "{method} ({variant}): best epoch {} of {}, validation objective {:.5}",
        run.best_epoch, run.epochs_run, run.best_validation.total
    );
    Ok(run)
}

/// Scores every test interaction with the trained recommender and reports the ranking metrics.
pub fn evaluate_model(
    split: &DatasetSplit,
    name: &str,
    encoder: &FeatureEncoder,
    recommender: &RecommenderModel,
    k: usize,
    bins: usize,
) -> anyhow::Result<MetricsReport> {
    if split.test.is_empty() {
        anyhow::bail!("the test part is empty; widen split.test_days or supply more days of data");
    }
    let edges = log_duration_edges(&split.test, bins)?;
    Ok(evaluate(name, &split.test, k, edges, |r| {
        recommender.forward(&encoder.encode(r))
    })?)
}

/// Trains and evaluates in one go.
pub fn train_and_evaluate(
    split: &DatasetSplit,
    cfg: &ExperimentConfig,
    method: Method,
    variant: Variant,
    name: &str,
) -> anyhow::Result<(MethodRun, MetricsReport)> {
    let run = train_method(split, cfg, method, variant)?;
    let report = evaluate_model(split, name, &run.encoder, &run.recommender, cfg.k, cfg.histogram_bins)?;
    Ok((run, report))
}
