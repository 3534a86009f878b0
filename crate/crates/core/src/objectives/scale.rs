//! Piecewise min-max scaling for long-tailed feedback (watch time, duration).
//!
//! Values up to the β-th percentile map linearly onto `[0, β']`, the tail onto
//! `[β', 1]`, with `β' = max(v_β / v_max, 1 - β/100)` so the head never
//! collapses into less than `1 - β/100` of the unit interval.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_BETA: f64 = 80.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScaleTarget {
    WatchTime,
    Duration,
    #[default]
    Other,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScaleMode {
    /// Two-segment scaling with a knee at the β-th percentile.
    #[default]
    Piecewise,
    /// Plain `v / v_max`, used to ablate the piecewise scheme.
    MinMax,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaleParams {
    pub v_max: f64,
    pub v_beta: f64,
    /// Percentile in (0, 100).
    pub beta: f64,
    pub beta_prime: f64,
    pub fitted_on: ScaleTarget,
    #[serde(default)]
    pub mode: ScaleMode,
}

/// Nearest-rank percentile of an ascending slice.
pub fn nearest_rank(sorted: &[f64], percentile: f64) -> f64 {
    let n = sorted.len();
    let rank = ((percentile / 100.0) * n as f64).ceil() as usize;
    sorted[rank.clamp(1, n) - 1]
}

pub fn fit_scale(values: &[f64], beta: f64) -> Result<ScaleParams> {
    if values.is_empty() {
        return Err(Error::Argument("cannot fit scale on empty values".into()));
    }
    if !(beta > 0.0 && beta < 100.0) {
        return Err(Error::Argument(format!("beta must be in (0, 100), got {beta}")));
    }
    if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
        return Err(Error::Argument(format!(
            "scale values must be finite and >= 0, got {v}"
        )));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let v_max = sorted[sorted.len() - 1];
    let v_beta = nearest_rank(&sorted, beta);
    let ratio = if v_max > 0.0 { v_beta / v_max } else { 0.0 };
    Ok(ScaleParams {
        v_max,
        v_beta,
        beta,
        beta_prime: ratio.max(1.0 - beta / 100.0),
        fitted_on: ScaleTarget::Other,
        mode: ScaleMode::Piecewise,
    })
}

impl ScaleParams {
    pub fn on(mut self, target: ScaleTarget) -> Self {
        self.fitted_on = target;
        self
    }

    pub fn with_mode(mut self, mode: ScaleMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn apply(&self, v: f64) -> f64 {
        scale_value(self, v)
    }
}

/// Maps `v >= 0` into `[0, 1]`; values above `v_max` are clamped first.
pub fn scale_value(p: &ScaleParams, v: f64) -> f64 {
    let v = v.clamp(0.0, p.v_max);
    match p.mode {
        ScaleMode::MinMax => {
            if p.v_max > 0.0 {
                v / p.v_max
            } else {
                0.0
            }
        }
        ScaleMode::Piecewise => {
            if v <= p.v_beta {
                if p.v_beta > 0.0 {
                    v / p.v_beta * p.beta_prime
                } else {
                    0.0
                }
            } else if p.v_max > p.v_beta {
                1.0 - (1.0 - p.beta_prime) * (p.v_max - v) / (p.v_max - p.v_beta)
            } else {
                1.0
            }
        }
    }
}
