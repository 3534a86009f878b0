//! Rule-based label generators trained through the same supervised path.

use std::fmt;
use std::str::FromStr;

use log::warn;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{InteractionRecord, Part};
use crate::error::{Error, Result};
use crate::model::{sigmoid, RecInput, RecommenderModel};
use crate::objectives::{fit_scale, nearest_rank, ObjectiveBreakdown, ScaleParams, ScaleTarget};
use crate::trainer::{
    run_epochs, supervised_loss_grad, EpochStepper, HistoryRecord, LossKind, PreparedData, StopReason, TrainConfig,
    TrainSample,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RuleKind {
    /// Scaled watch time.
    Wt,
    /// Any explicit feedback.
    Ef,
    /// Full play completion.
    Pc,
    /// Play completion rate.
    Pcr,
    /// Watch-time quantile within the duration bucket.
    D2q,
    /// Watch-time z-score within the duration bucket, squashed.
    Dvr,
}

impl RuleKind {
    pub const ALL: [RuleKind; 6] = [
        RuleKind::Wt,
        RuleKind::Ef,
        RuleKind::Pc,
        RuleKind::Pcr,
        RuleKind::D2q,
        RuleKind::Dvr,
    ];

    pub fn name(self) -> &'static str {
        match self {
            RuleKind::Wt => "wt",
            RuleKind::Ef => "ef",
            RuleKind::Pc => "pc",
            RuleKind::Pcr => "pcr",
            RuleKind::D2q => "d2q",
            RuleKind::Dvr => "dvr",
        }
    }

    pub fn loss(self) -> LossKind {
        match self {
            RuleKind::Ef | RuleKind::Pc => LossKind::Bce,
            _ => LossKind::Mse,
        }
    }

    fn needs_buckets(self) -> bool {
        matches!(self, RuleKind::D2q | RuleKind::Dvr)
    }
}

impl fmt::Display for RuleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for RuleKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        RuleKind::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Argument(format!("unknown label rule '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabelRule {
    pub kind: RuleKind,
    pub n_buckets: usize,
    /// Use raw watch-time seconds for WT instead of the scaled value.
    pub wt_raw: bool,
}

impl LabelRule {
    pub fn new(kind: RuleKind) -> Self {
        LabelRule {
            kind,
            n_buckets: 10,
            wt_raw: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BucketStats {
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
    pub sorted_watch: Vec<f64>,
}

/// Duration-quantile buckets with watch-time statistics.
///
/// Bucket `j` holds durations in `(edges[j-1], edges[j]]`; the first bucket is
/// unbounded below and the last unbounded above.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DurationBuckets {
    pub edges: Vec<f64>,
    pub stats: Vec<BucketStats>,
    /// Part the statistics were computed on.
    pub fitted_on: Part,
}

impl DurationBuckets {
    pub fn bucket_of(&self, duration: f64) -> usize {
        self.edges.partition_point(|&e| e < duration)
    }

    pub fn len(&self) -> usize {
        self.stats.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stats.is_empty()
    }
}

/// Buckets at nearest-rank duration quantiles of the (training) records.
pub fn fit_duration_buckets(records: &[InteractionRecord], n_buckets: usize) -> Result<DurationBuckets> {
    if n_buckets == 0 {
        return Err(Error::Argument("bucket count must be >= 1".into()));
    }
    if records.is_empty() {
        return Err(Error::Argument("cannot fit buckets on empty records".into()));
    }
    let mut durations: Vec<f64> = records.iter().map(|r| r.duration).collect();
    durations.sort_by(f64::total_cmp);
    let max = durations[durations.len() - 1];
    let mut edges: Vec<f64> = Vec::new();
    for j in 1..n_buckets {
        let e = nearest_rank(&durations, 100.0 * j as f64 / n_buckets as f64);
        if e < max && edges.last().is_none_or(|&last| e > last) {
            edges.push(e);
        }
    }
    let mut watch: Vec<Vec<f64>> = vec![Vec::new(); edges.len() + 1];
    let probe = DurationBuckets {
        edges,
        stats: Vec::new(),
        fitted_on: Part::Train,
    };
    for r in records {
        watch[probe.bucket_of(r.duration)].push(r.watch_time);
    }
    let stats = watch
        .into_iter()
        .map(|mut w| {
            w.sort_by(f64::total_cmp);
            let n = w.len().max(1) as f64;
            let mean = w.iter().sum::<f64>() / n;
            let var = w.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
            BucketStats {
                mean,
                std: var.sqrt(),
                sorted_watch: w,
            }
        })
        .collect();
    Ok(DurationBuckets { stats, ..probe })
}

pub fn label_wt(r: &InteractionRecord, scale: &ScaleParams) -> f64 {
    scale.apply(r.watch_time)
}

pub fn label_ef(r: &InteractionRecord) -> f64 {
    r.explicit_indicator()
}

pub fn label_pc(r: &InteractionRecord) -> f64 {
    if r.watch_time >= r.duration {
        1.0
    } else {
        0.0
    }
}

pub fn label_pcr(r: &InteractionRecord) -> f64 {
    (r.watch_time / r.duration).min(1.0)
}

/// Share of the bucket's training watch times that are `<= y_w`.
pub fn label_d2q(r: &InteractionRecord, buckets: &DurationBuckets) -> f64 {
    let s = &buckets.stats[buckets.bucket_of(r.duration)];
    if s.sorted_watch.is_empty() {
        return 0.0;
    }
    s.sorted_watch.partition_point(|&w| w <= r.watch_time) as f64 / s.sorted_watch.len() as f64
}

/// `sigmoid((y_w - mean) / std)` within the duration bucket; a zero std gives 0.5.
pub fn label_dvr(r: &InteractionRecord, buckets: &DurationBuckets) -> f64 {
    let s = &buckets.stats[buckets.bucket_of(r.duration)];
    let z = if s.std > 0.0 {
        (r.watch_time - s.mean) / s.std
    } else {
        0.0
    };
    sigmoid(z)
}

/// A rule together with whatever it was fitted on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedRule {
    pub rule: LabelRule,
    pub watch_scale: Option<ScaleParams>,
    pub buckets: Option<DurationBuckets>,
}

impl FittedRule {
    /// Fits the rule's parameters on training records only.
    pub fn fit(rule: LabelRule, train: &[InteractionRecord], beta: f64) -> Result<Self> {
        let watch_scale = if rule.kind == RuleKind::Wt && !rule.wt_raw {
            let w: Vec<f64> = train.iter().map(|r| r.watch_time).collect();
            Some(fit_scale(&w, beta)?.on(ScaleTarget::WatchTime))
        } else {
            None
        };
        let buckets = if rule.kind.needs_buckets() {
            Some(fit_duration_buckets(train, rule.n_buckets)?)
        } else {
            None
        };
        Ok(FittedRule {
            rule,
            watch_scale,
            buckets,
        })
    }

    pub fn label(&self, r: &InteractionRecord) -> Result<f64> {
        let unfitted = || Error::State(format!("rule {} used before fitting", self.rule.kind));
        Ok(match self.rule.kind {
            RuleKind::Wt if self.rule.wt_raw => r.watch_time,
            RuleKind::Wt => label_wt(r, self.watch_scale.as_ref().ok_or_else(unfitted)?),
            RuleKind::Ef => label_ef(r),
            RuleKind::Pc => label_pc(r),
            RuleKind::Pcr => label_pcr(r),
            RuleKind::D2q => label_d2q(r, self.buckets.as_ref().ok_or_else(unfitted)?),
            RuleKind::Dvr => label_dvr(r, self.buckets.as_ref().ok_or_else(unfitted)?),
        })
    }
}

#[derive(Debug, Clone)]
pub struct RuleOutcome {
    pub rule: FittedRule,
    pub recommender: RecommenderModel,
    pub history: Vec<HistoryRecord>,
    pub best_epoch: usize,
    pub epochs_run: usize,
    pub stop_reason: StopReason,
    pub best_validation: ObjectiveBreakdown,
    /// True when every training label was identical.
    pub constant_labels: bool,
}

struct FixedLabels<'a> {
    labels: &'a [f64],
    loss: LossKind,
    cfg: &'a TrainConfig,
}

impl EpochStepper for FixedLabels<'_> {
    fn step(
        &mut self,
        rec: &RecommenderModel,
        batch: &[&TrainSample],
        batch_ids: &[usize],
        _data: &PreparedData,
        _rng: &mut ChaCha8Rng,
    ) -> Result<(RecommenderModel, f64, Option<ObjectiveBreakdown>)> {
        let inputs: Vec<&RecInput> = batch.iter().map(|s| &s.input).collect();
        let labels: Vec<f64> = batch_ids.iter().map(|&i| self.labels[i]).collect();
        let out = supervised_loss_grad(rec, &inputs, &labels, self.loss, self.cfg.lambda)?;
        let mut params = rec.params.clone();
        params.axpy(-self.cfg.eta1, &out.grad)?;
        Ok((rec.with_params(params)?, out.loss, None))
    }
}

/// Supervised training on rule labels with the trainer's early stopping.
pub fn train_with_rule(rule: LabelRule, data: &PreparedData, cfg: &TrainConfig) -> Result<RuleOutcome> {
    cfg.validate()?;
    let fitted = FittedRule::fit(rule, &data.train_records, cfg.beta)?;
    let labels = data
        .train_records
        .iter()
        .map(|r| fitted.label(r))
        .collect::<Result<Vec<f64>>>()?;
    let constant_labels = labels.windows(2).all(|w| w[0] == w[1]);
    if constant_labels {
        warn!(
            "rule {} produced constant training labels; the recommender has nothing to fit",
            rule.kind
        );
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let rec = RecommenderModel::init(data.recommender_spec(cfg), &mut rng);
    let mut stepper = FixedLabels {
        labels: &labels,
        loss: rule.kind.loss(),
        cfg,
    };
    let run = run_epochs(data, cfg, rec, &mut stepper, &mut rng)?;
    Ok(RuleOutcome {
        rule: fitted,
        recommender: run.recommender,
        history: run.history,
        best_epoch: run.best_epoch,
        epochs_run: run.epochs_run,
        stop_reason: run.stop_reason,
        best_validation: run.best_validation,
        constant_labels,
    })
}
