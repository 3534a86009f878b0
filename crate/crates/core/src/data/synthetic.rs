//! Synthetic interaction logs with a controllable duration bias.
//!
//! Users and items get latent vectors; the true preference is
//! `p = sigmoid(user · item)`. Watch time is
//! `duration * clamp(p + strength * g(duration) + noise, 0, 1)` with
//! `g(d) = ln(d / d_min) / ln(d_max / d_min) - 1/2`, so longer videos collect
//! more watch time independently of preference. Each explicit flag is drawn
//! from `Bernoulli(explicit_rate * p)`.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::record::{Dataset, FeatureSchema, Features, InteractionRecord, N_EXPLICIT};
use super::split::SECONDS_PER_DAY;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticConfig {
    pub n_users: usize,
    pub n_items: usize,
    pub n_days: usize,
    pub latent_dim: usize,
    pub duration_bias_strength: f64,
    pub explicit_rate: f64,
    pub seed: u64,
    /// Interactions drawn per user per day (without replacement within a day).
    pub interactions_per_user_day: usize,
    /// Std of the Gaussian noise added to the watch ratio.
    pub noise_std: f64,
    /// Durations are log-uniform on `[min_duration, max_duration]` seconds.
    pub min_duration: f64,
    pub max_duration: f64,
    /// Norm of the taste direction shared by all users.
    pub shared_taste: f64,
    pub start_timestamp: i64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            n_users: 200,
            n_items: 300,
            n_days: 14,
            latent_dim: 8,
            duration_bias_strength: 0.5,
            explicit_rate: 0.2,
            seed: 0,
            interactions_per_user_day: 10,
            noise_std: 0.1,
            min_duration: 5.0,
            max_duration: 300.0,
            shared_taste: 1.0,
            start_timestamp: 1_600_000_000,
        }
    }
}

impl SyntheticConfig {
    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("n_users", self.n_users),
            ("n_items", self.n_items),
            ("n_days", self.n_days),
            ("latent_dim", self.latent_dim),
            ("interactions_per_user_day", self.interactions_per_user_day),
        ];
        if let Some((name, _)) = counts.iter().find(|(_, v)| *v == 0) {
            return Err(Error::Config(format!("{name} must be > 0")));
        }
        if self.interactions_per_user_day > self.n_items {
            return Err(Error::Config("interactions_per_user_day exceeds n_items".into()));
        }
        if !(0.0..=1.0).contains(&self.explicit_rate) {
            return Err(Error::Config(format!(
                "explicit_rate must be in [0,1], got {}",
                self.explicit_rate
            )));
        }
        if !(self.duration_bias_strength >= 0.0 && self.duration_bias_strength.is_finite()) {
            return Err(Error::Config("duration_bias_strength must be nonnegative".into()));
        }
        if !(self.noise_std >= 0.0 && self.noise_std.is_finite()) {
            return Err(Error::Config("noise_std must be nonnegative".into()));
        }
        if !(self.min_duration > 0.0 && self.max_duration > self.min_duration) {
            return Err(Error::Config("require 0 < min_duration < max_duration".into()));
        }
        Ok(())
    }

    /// The increasing duration-bias shape, in `[-1/2, 1/2]`.
    pub fn bias_shape(&self, duration: f64) -> f64 {
        (duration / self.min_duration).ln() / (self.max_duration / self.min_duration).ln() - 0.5
    }
}

/// Generated records plus the true preference `p` of each record.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticData {
    pub dataset: Dataset,
    pub preference: Vec<f64>,
}

pub fn generate_synthetic(cfg: &SyntheticConfig) -> Result<Dataset> {
    Ok(generate_synthetic_with_truth(cfg)?.dataset)
}

pub fn generate_synthetic_with_truth(cfg: &SyntheticConfig) -> Result<SyntheticData> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let d = cfg.latent_dim;
    let unit = Normal::new(0.0, 1.0).expect("unit normal");
    let scale = 1.0 / (d as f64).sqrt();

    let mut taste: Vec<f64> = (0..d).map(|_| unit.sample(&mut rng)).collect();
    let norm = taste.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-12);
    taste.iter_mut().for_each(|v| *v *= cfg.shared_taste / norm);

    let users: Vec<Vec<f64>> = (0..cfg.n_users)
        .map(|_| taste.iter().map(|t| t + scale * unit.sample(&mut rng)).collect())
        .collect();
    let items: Vec<Vec<f64>> = (0..cfg.n_items)
        .map(|_| (0..d).map(|_| unit.sample(&mut rng)).collect())
        .collect();
    let log_span = (cfg.max_duration / cfg.min_duration).ln();
    let durations: Vec<f64> = (0..cfg.n_items)
        .map(|_| {
            let raw = cfg.min_duration * (rng.random::<f64>() * log_span).exp();
            (raw * 10.0).round() / 10.0
        })
        .collect();
    let tags: Vec<String> = items
        .iter()
        .map(|v| {
            let best = v.iter().enumerate().fold(
                (0, f64::NEG_INFINITY),
                |acc, (j, &x)| if x > acc.1 { (j, x) } else { acc },
            );
            format!("tag{}", best.0)
        })
        .collect();

    let noise = Normal::new(0.0, cfg.noise_std.max(f64::MIN_POSITIVE)).expect("noise normal");
    let per_day = cfg.interactions_per_user_day;
    let mut records = Vec::with_capacity(cfg.n_users * cfg.n_days * per_day);
    let mut preference = Vec::with_capacity(records.capacity());
    for day in 0..cfg.n_days {
        let day_start = cfg.start_timestamp + day as i64 * SECONDS_PER_DAY;
        for (u, user) in users.iter().enumerate() {
            let mut picks: Vec<(i64, usize)> = sample(&mut rng, cfg.n_items, per_day)
                .into_iter()
                .map(|i| (day_start + rng.random_range(0..SECONDS_PER_DAY), i))
                .collect();
            picks.sort_unstable();
            for (timestamp, i) in picks {
                let logit: f64 = user.iter().zip(&items[i]).map(|(a, b)| a * b).sum();
                let p = 1.0 / (1.0 + (-logit).exp());
                let duration = durations[i];
                let eps = if cfg.noise_std > 0.0 {
                    noise.sample(&mut rng)
                } else {
                    0.0
                };
                let ratio = (p + cfg.duration_bias_strength * cfg.bias_shape(duration) + eps).clamp(0.0, 1.0);
                let watch_time = (duration * ratio * 100.0).round() / 100.0;
                let mut explicit = [0u8; N_EXPLICIT];
                for flag in explicit.iter_mut() {
                    *flag = u8::from(rng.random::<f64>() < cfg.explicit_rate * p);
                }
                records.push(InteractionRecord {
                    user_id: u as u64,
                    item_id: i as u64,
                    timestamp,
                    duration,
                    watch_time,
                    explicit,
                    features: Features {
                        categorical: vec![tags[i].clone()],
                        numeric: Vec::new(),
                    },
                });
                preference.push(p);
            }
        }
    }
    Ok(SyntheticData {
        dataset: Dataset {
            schema: FeatureSchema {
                categorical: vec!["feat_tag".into()],
                numeric: Vec::new(),
            },
            records,
        },
        preference,
    })
}
