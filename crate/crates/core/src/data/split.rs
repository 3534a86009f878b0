use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use super::record::{Dataset, FeatureSchema, InteractionRecord};
use crate::error::{Error, Result};

pub const SECONDS_PER_DAY: i64 = 86_400;

/// Which part of a [`DatasetSplit`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Part {
    Train,
    Validation,
    Test,
}

/// Day-based chronological split. The validation part doubles as the meta hold-out set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSplit {
    pub schema: FeatureSchema,
    pub train: Vec<InteractionRecord>,
    pub validation: Vec<InteractionRecord>,
    pub test: Vec<InteractionRecord>,
    /// Timestamp where day zero starts.
    pub origin: i64,
    /// First day index (relative to `origin`) of validation and of test.
    pub boundaries: (i64, i64),
}

impl DatasetSplit {
    pub fn part(&self, part: Part) -> &[InteractionRecord] {
        match part {
            Part::Train => &self.train,
            Part::Validation => &self.validation,
            Part::Test => &self.test,
        }
    }

    /// Per-user index of one part.
    pub fn user_index(&self, part: Part) -> BTreeMap<u64, Vec<&InteractionRecord>> {
        group_by_user(self.part(part))
    }
}

/// Day index of `timestamp` relative to `origin`.
pub fn day_of(timestamp: i64, origin: i64) -> i64 {
    (timestamp - origin).div_euclid(SECONDS_PER_DAY)
}

/// Splits records into consecutive day windows counted from the earliest timestamp.
///
/// Train covers days `[0, train_days)`, validation the next `val_days`, test
/// everything from there on (`test_days` is its nominal length). Train and
/// validation must be nonempty; an empty test part is allowed so a run can be
/// trained without held-out evaluation data.
pub fn chronological_split(dataset: &Dataset, train_days: u32, val_days: u32, test_days: u32) -> Result<DatasetSplit> {
    if dataset.is_empty() {
        return Err(Error::Config("cannot split an empty dataset".into()));
    }
    if train_days == 0 || val_days == 0 {
        return Err(Error::Config(format!(
            "train and validation windows must be at least one day (got {train_days}, {val_days}, {test_days})"
        )));
    }
    let origin = dataset.records.iter().map(|r| r.timestamp).min().unwrap_or(0);
    let val_start = i64::from(train_days);
    let test_start = val_start + i64::from(val_days);
    let mut split = DatasetSplit {
        schema: dataset.schema.clone(),
        train: Vec::new(),
        validation: Vec::new(),
        test: Vec::new(),
        origin,
        boundaries: (val_start, test_start),
    };
    for r in &dataset.records {
        let day = day_of(r.timestamp, origin);
        if day < val_start {
            split.train.push(r.clone());
        } else if day < test_start {
            split.validation.push(r.clone());
        } else {
            split.test.push(r.clone());
        }
    }
    if split.train.is_empty() {
        return Err(Error::Config("empty training split".into()));
    }
    if split.validation.is_empty() {
        return Err(Error::Config("empty validation split".into()));
    }
    Ok(split)
}

/// Groups records by user; each group is ordered by timestamp (ties keep input order).
pub fn group_by_user(records: &[InteractionRecord]) -> BTreeMap<u64, Vec<&InteractionRecord>> {
    let mut groups: BTreeMap<u64, Vec<&InteractionRecord>> = BTreeMap::new();
    for r in records {
        groups.entry(r.user_id).or_default().push(r);
    }
    for list in groups.values_mut() {
        list.sort_by_key(|r| r.timestamp);
    }
    groups
}

/// Iteratively drops records of users with fewer than `k_user` and items with
/// fewer than `k_item` interactions until both thresholds hold.
pub fn kcore_filter(records: &[InteractionRecord], k_user: usize, k_item: usize) -> Vec<InteractionRecord> {
    let mut keep: Vec<bool> = vec![true; records.len()];
    loop {
        let mut user_counts: HashMap<u64, usize> = HashMap::new();
        let mut item_counts: HashMap<u64, usize> = HashMap::new();
        for (r, _) in records.iter().zip(&keep).filter(|(_, k)| **k) {
            *user_counts.entry(r.user_id).or_default() += 1;
            *item_counts.entry(r.item_id).or_default() += 1;
        }
        let mut changed = false;
        for (r, k) in records.iter().zip(keep.iter_mut()) {
            if *k && (user_counts[&r.user_id] < k_user || item_counts[&r.item_id] < k_item) {
                *k = false;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    records
        .iter()
        .zip(keep)
        .filter(|(_, k)| *k)
        .map(|(r, _)| r.clone())
        .collect()
}
