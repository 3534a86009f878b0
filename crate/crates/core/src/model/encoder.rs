//! Turns interaction records into recommender inputs.
//!
//! User and item ids get vocabulary rows fitted on the training part (row 0 is
//! reserved for ids never seen in training). Categorical side features are
//! hashed into a shared table. Duration enters as a standardized log value;
//! numeric side features pass through unchanged.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::recommender::{RecInput, RecommenderSpec};
use crate::data::{FeatureSchema, InteractionRecord};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EncoderConfig {
    pub cat_table_size: usize,
    /// Most recent training items pooled into the history embedding; 0 disables it.
    pub history_len: usize,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        EncoderConfig {
            cat_table_size: 64,
            history_len: 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureEncoder {
    pub config: EncoderConfig,
    pub schema: FeatureSchema,
    users: BTreeMap<u64, usize>,
    items: BTreeMap<u64, usize>,
    histories: BTreeMap<u64, Arc<[usize]>>,
    log_duration_mean: f64,
    log_duration_std: f64,
}

/// FNV-1a, 64 bit.
fn fnv1a(bytes: impl IntoIterator<Item = u8>) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

impl FeatureEncoder {
    pub fn fit(train: &[InteractionRecord], schema: &FeatureSchema, config: EncoderConfig) -> Self {
        let mut users = BTreeMap::new();
        let mut items = BTreeMap::new();
        for r in train {
            users.entry(r.user_id).or_insert(0);
            items.entry(r.item_id).or_insert(0);
        }
        for (row, v) in users.values_mut().enumerate() {
            *v = row + 1;
        }
        for (row, v) in items.values_mut().enumerate() {
            *v = row + 1;
        }

        let mut by_user: BTreeMap<u64, Vec<(i64, usize)>> = BTreeMap::new();
        for r in train {
            by_user
                .entry(r.user_id)
                .or_default()
                .push((r.timestamp, items[&r.item_id]));
        }
        let histories = by_user
            .into_iter()
            .map(|(u, mut list)| {
                list.sort_unstable();
                let skip = list.len().saturating_sub(config.history_len);
                let rows: Vec<usize> = list[skip..].iter().map(|&(_, row)| row).collect();
                (u, Arc::from(rows))
            })
            .collect();

        let logs: Vec<f64> = train.iter().map(|r| r.duration.ln()).collect();
        let n = logs.len().max(1) as f64;
        let mean = logs.iter().sum::<f64>() / n;
        let var = logs.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;

        FeatureEncoder {
            config,
            schema: schema.clone(),
            users,
            items,
            histories,
            log_duration_mean: mean,
            log_duration_std: if var > 0.0 { var.sqrt() } else { 1.0 },
        }
    }

    pub fn n_user_rows(&self) -> usize {
        self.users.len() + 1
    }

    pub fn n_item_rows(&self) -> usize {
        self.items.len() + 1
    }

    /// Recommender dimensions implied by this encoder.
    pub fn recommender_spec(&self, emb_dim: usize, hidden: Vec<usize>, interactions: bool) -> RecommenderSpec {
        RecommenderSpec {
            n_users: self.n_user_rows(),
            n_items: self.n_item_rows(),
            emb_dim,
            cat_table_size: self.config.cat_table_size.max(1),
            n_categorical: self.schema.categorical.len(),
            n_numeric: 1 + self.schema.numeric.len(),
            use_history: self.config.history_len > 0,
            interactions,
            hidden,
        }
    }

    fn hash_category(&self, feature: usize, value: &str) -> usize {
        let name = self.schema.categorical.get(feature).map(String::as_str).unwrap_or("");
        let bytes = name.bytes().chain(std::iter::once(0u8)).chain(value.bytes());
        (fnv1a(bytes) % self.config.cat_table_size.max(1) as u64) as usize
    }

    pub fn encode(&self, r: &InteractionRecord) -> RecInput {
        let mut numeric = Vec::with_capacity(1 + r.features.numeric.len());
        numeric.push((r.duration.ln() - self.log_duration_mean) / self.log_duration_std);
        numeric.extend_from_slice(&r.features.numeric);
        RecInput {
            user: self.users.get(&r.user_id).copied().unwrap_or(0),
            item: self.items.get(&r.item_id).copied().unwrap_or(0),
            categorical: r
                .features
                .categorical
                .iter()
                .enumerate()
                .map(|(j, v)| self.hash_category(j, v))
                .collect(),
            history: self
                .histories
                .get(&r.user_id)
                .cloned()
                .unwrap_or_else(|| Arc::from(Vec::new())),
            numeric,
        }
    }
}
