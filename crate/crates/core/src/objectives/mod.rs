//! Platform objectives over soft top-k lists and their gradients.
//!
//! Three sub-objectives are computed per user and averaged: scaled watch time
//! (`m1`), explicit-feedback hit rate (`m2`) and duration diversity (`m3`).
//! They are merged with softmax weights `exp(-τ m_i)` that are treated as
//! constants when differentiating.

mod scale;

pub use scale::{fit_scale, nearest_rank, scale_value, ScaleMode, ScaleParams, ScaleTarget, DEFAULT_BETA};

use serde::{Deserialize, Serialize};

use crate::data::InteractionRecord;
use crate::error::{Error, Result};
use crate::model::FeedbackScalers;
use crate::softtopk::{hard_topk, soft_topk, soft_topk_vjp, standardize, standardize_vjp, SoftTopKConfig};

/// Index of each sub-objective in weight and mask vectors.
pub const WATCH: usize = 0;
pub const EXPLICIT: usize = 1;
pub const DIVERSITY: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum M3Exponent {
    /// `2 * std`, maximized together with the other objectives.
    #[default]
    Sqrt,
    /// `1 / std`.
    InvSqrt,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ObjectiveConfig {
    pub k: usize,
    pub tau: f64,
    pub softtopk: SoftTopKConfig,
    pub m3_exponent: M3Exponent,
    /// Which of (watch, explicit, diversity) enter the merged total.
    pub include: [bool; 3],
    /// When false all included objectives get equal weight.
    pub balancing: bool,
}

impl Default for ObjectiveConfig {
    fn default() -> Self {
        ObjectiveConfig {
            k: 10,
            tau: 0.5,
            softtopk: SoftTopKConfig::default(),
            m3_exponent: M3Exponent::Sqrt,
            include: [true; 3],
            balancing: true,
        }
    }
}

impl ObjectiveConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::Config("k must be >= 1".into()));
        }
        if !(self.tau >= 0.0 && self.tau.is_finite()) {
            return Err(Error::Config(format!("tau must be >= 0, got {}", self.tau)));
        }
        if !self.include.iter().any(|&b| b) {
            return Err(Error::Config("at least one sub-objective must be included".into()));
        }
        self.softtopk.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveBreakdown {
    pub m1: f64,
    pub m2: f64,
    pub m3: f64,
    pub weights: [f64; 3],
    pub total: f64,
    pub tau: f64,
}

impl ObjectiveBreakdown {
    pub fn values(&self) -> [f64; 3] {
        [self.m1, self.m2, self.m3]
    }
}

/// Per-record quantities the objectives consume, already scaled into `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ListItem {
    pub watch: f64,
    pub explicit: f64,
    pub duration: f64,
}

impl ListItem {
    pub fn from_record(r: &InteractionRecord, scalers: &FeedbackScalers) -> Self {
        ListItem {
            watch: scalers.watch.apply(r.watch_time),
            explicit: r.explicit_indicator(),
            duration: scalers.duration.apply(r.duration),
        }
    }
}

/// Softmax of `-τ m` over the included entries; excluded entries get weight 0.
pub fn balance_masked(m: [f64; 3], tau: f64, include: [bool; 3]) -> ([f64; 3], f64) {
    let lo = (0..3)
        .filter(|&i| include[i])
        .map(|i| -tau * m[i])
        .fold(f64::NEG_INFINITY, f64::max);
    let mut w = [0.0; 3];
    for i in 0..3 {
        if include[i] {
            w[i] = (-tau * m[i] - lo).exp();
        }
    }
    let z: f64 = w.iter().sum();
    for wi in &mut w {
        *wi /= z;
    }
    let total = (0..3).map(|i| w[i] * m[i]).sum();
    (w, total)
}

pub fn balance(m: [f64; 3], tau: f64) -> ([f64; 3], f64) {
    balance_masked(m, tau, [true; 3])
}

fn merge(m: [f64; 3], cfg: &ObjectiveConfig) -> ObjectiveBreakdown {
    let tau = if cfg.balancing { cfg.tau } else { 0.0 };
    let (weights, total) = balance_masked(m, tau, cfg.include);
    ObjectiveBreakdown {
        m1: m[0],
        m2: m[1],
        m3: m[2],
        weights,
        total,
        tau: cfg.tau,
    }
}

struct UserTerms {
    m: [f64; 3],
    /// `∂m_i/∂α_j` for each sub-objective.
    d_alpha: [Vec<f64>; 3],
}

fn user_terms(alpha: &[f64], items: &[ListItem], k: f64, exponent: M3Exponent) -> UserTerms {
    let n = items.len();
    let mut m1 = 0.0;
    let mut m2 = 0.0;
    let mut e = 0.0;
    for (a, it) in alpha.iter().zip(items) {
        m1 += a / k * it.watch;
        m2 += a / k * it.explicit;
        e += a * it.duration / k;
    }
    let mut var = 0.0;
    let mut s = 0.0;
    for (a, it) in alpha.iter().zip(items) {
        let dev = it.duration - e;
        var += a / k * dev * dev;
        s += a / k * dev;
    }
    let var = var.max(0.0);
    let (m3, dm3_dvar) = match exponent {
        M3Exponent::Sqrt if var > 0.0 => (2.0 * var.sqrt(), 1.0 / var.sqrt()),
        M3Exponent::Sqrt => (0.0, 0.0),
        M3Exponent::InvSqrt => {
            let v = var.max(1e-12);
            (v.powf(-0.5), -0.5 * v.powf(-1.5))
        }
    };
    let d1 = items.iter().map(|it| it.watch / k).collect();
    let d2 = items.iter().map(|it| it.explicit / k).collect();
    let d3 = (0..n)
        .map(|i| {
            let d = items[i].duration;
            dm3_dvar * ((d - e).powi(2) / k - 2.0 * d / k * s)
        })
        .collect();
    UserTerms {
        m: [m1, m2, m3],
        d_alpha: [d1, d2, d3],
    }
}

/// Soft membership for one list: `(alpha, effective k, solver state)`.
/// Lists no longer than `k` are selected whole and carry no solver state.
fn soft_alpha(
    preds: &[f64],
    k: usize,
    cfg: &SoftTopKConfig,
) -> Result<(
    Vec<f64>,
    usize,
    Option<(crate::softtopk::SoftTopKResult, Vec<f64>, f64)>,
)> {
    let n = preds.len();
    if n <= k {
        return Ok((vec![1.0; n], n, None));
    }
    let (z, std) = standardize(preds);
    let res = soft_topk(&z, k, cfg)?;
    Ok((res.alpha.clone(), k, Some((res, z, std))))
}

fn check_lists(preds: &[Vec<f64>], lists: &[Vec<ListItem>]) -> Result<()> {
    if lists.is_empty() {
        return Err(Error::Argument("objectives need at least one user group".into()));
    }
    if preds.len() != lists.len() {
        return Err(Error::Shape(format!(
            "{} prediction lists for {} groups",
            preds.len(),
            lists.len()
        )));
    }
    for (p, l) in preds.iter().zip(lists) {
        if l.is_empty() {
            return Err(Error::Argument("user group is empty".into()));
        }
        if p.len() != l.len() {
            return Err(Error::Shape(format!("{} predictions for {} records", p.len(), l.len())));
        }
    }
    Ok(())
}

/// Sub-objectives `[m1, m2, m3]` under soft top-k selection, plus each user's alpha.
pub fn sub_objectives(
    preds: &[Vec<f64>],
    lists: &[Vec<ListItem>],
    cfg: &ObjectiveConfig,
) -> Result<([f64; 3], Vec<Vec<f64>>)> {
    check_lists(preds, lists)?;
    let mut m = [0.0; 3];
    let mut alphas = Vec::with_capacity(lists.len());
    for (p, items) in preds.iter().zip(lists) {
        let (alpha, keff, _) = soft_alpha(p, cfg.k, &cfg.softtopk)?;
        let t = user_terms(&alpha, items, keff as f64, cfg.m3_exponent);
        for i in 0..3 {
            m[i] += t.m[i];
        }
        alphas.push(alpha);
    }
    let u = lists.len() as f64;
    for v in &mut m {
        *v /= u;
    }
    Ok((m, alphas))
}

/// Merged soft objective.
pub fn soft_objective(
    preds: &[Vec<f64>],
    lists: &[Vec<ListItem>],
    cfg: &ObjectiveConfig,
) -> Result<ObjectiveBreakdown> {
    Ok(merge(sub_objectives(preds, lists, cfg)?.0, cfg))
}

/// Merged objective and `dM/dprediction` for every record, weights held constant.
pub fn objective_pred_grads(
    preds: &[Vec<f64>],
    lists: &[Vec<ListItem>],
    cfg: &ObjectiveConfig,
) -> Result<(ObjectiveBreakdown, Vec<Vec<f64>>)> {
    check_lists(preds, lists)?;
    let mut m = [0.0; 3];
    let mut pending = Vec::with_capacity(lists.len());
    for (p, items) in preds.iter().zip(lists) {
        let (alpha, keff, solved) = soft_alpha(p, cfg.k, &cfg.softtopk)?;
        let t = user_terms(&alpha, items, keff as f64, cfg.m3_exponent);
        for i in 0..3 {
            m[i] += t.m[i];
        }
        pending.push((t, solved));
    }
    let u = lists.len() as f64;
    for v in &mut m {
        *v /= u;
    }
    let breakdown = merge(m, cfg);
    let w = breakdown.weights;
    let mut grads = Vec::with_capacity(lists.len());
    for ((t, solved), p) in pending.into_iter().zip(preds) {
        let Some((res, z, std)) = solved else {
            grads.push(vec![0.0; p.len()]);
            continue;
        };
        let upstream: Vec<f64> = (0..p.len())
            .map(|j| (0..3).map(|i| w[i] * t.d_alpha[i][j]).sum::<f64>() / u)
            .collect();
        let dz = soft_topk_vjp(&res, &z, &upstream)?;
        grads.push(standardize_vjp(&z, std, &dz));
    }
    Ok((breakdown, grads))
}

/// Merged objective with exact top-`min(k, n)` selection, used for model selection.
pub fn hard_objective(
    preds: &[Vec<f64>],
    lists: &[Vec<ListItem>],
    cfg: &ObjectiveConfig,
) -> Result<ObjectiveBreakdown> {
    check_lists(preds, lists)?;
    let mut m = [0.0; 3];
    for (p, items) in preds.iter().zip(lists) {
        let keff = cfg.k.min(p.len());
        let alpha = hard_topk(p, keff)?;
        let t = user_terms(&alpha, items, keff as f64, cfg.m3_exponent);
        for i in 0..3 {
            m[i] += t.m[i];
        }
    }
    let u = lists.len() as f64;
    for v in &mut m {
        *v /= u;
    }
    Ok(merge(m, cfg))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn item(watch: f64, explicit: f64, duration: f64) -> ListItem {
        ListItem {
            watch,
            explicit,
            duration,
        }
    }

    #[test]
    fn balance_examples() {
        let (w, total) = balance([0.2, 0.5, 0.8], 1.0);
        assert!((w[0] - 0.4368).abs() < 1e-4);
        assert!((w[1] - 0.3236).abs() < 1e-4);
        assert!((w[2] - 0.2397).abs() < 1e-4);
        assert!((total - 0.4409).abs() < 1e-4);
        let (w, total) = balance([0.1, 0.2, 0.6], 0.0);
        assert!(w.iter().all(|&x| (x - 1.0 / 3.0).abs() < 1e-15));
        assert!((total - 0.3).abs() < 1e-12);
        let (w, total) = balance([0.7; 3], 4.0);
        assert!(w.iter().all(|&x| (x - 1.0 / 3.0).abs() < 1e-15));
        assert!((total - 0.7).abs() < 1e-12);
    }

    #[test]
    fn masked_balance_renormalizes() {
        let (w, total) = balance_masked([0.2, 0.5, 0.8], 0.0, [true, false, true]);
        assert_eq!(w, [0.5, 0.0, 0.5]);
        assert!((total - 0.5).abs() < 1e-12);
    }

    #[test]
    fn full_selection_reduces_to_means() {
        let items = vec![item(0.2, 1.0, 0.1), item(0.4, 0.0, 0.5), item(0.9, 1.0, 0.9)];
        let preds = vec![vec![0.3, -0.1, 2.0]];
        let cfg = ObjectiveConfig {
            k: 3,
            ..ObjectiveConfig::default()
        };
        let (m, alphas) = sub_objectives(&preds, std::slice::from_ref(&items), &cfg).unwrap();
        assert_eq!(alphas[0], vec![1.0; 3]);
        assert!((m[0] - 0.5).abs() < 1e-12);
        assert!((m[1] - 2.0 / 3.0).abs() < 1e-12);
        let (_, grads) = objective_pred_grads(&preds, &[items], &cfg).unwrap();
        assert_eq!(grads[0], vec![0.0; 3]);
    }

    #[test]
    fn zero_watch_time_gives_zero_m1() {
        let items = vec![item(0.0, 0.0, 0.3); 5];
        let (m, _) = sub_objectives(
            &[vec![1.0, 2.0, 3.0, 4.0, 5.0]],
            &[items],
            &ObjectiveConfig {
                k: 2,
                ..ObjectiveConfig::default()
            },
        )
        .unwrap();
        assert_eq!(m[0], 0.0);
    }

    #[test]
    fn diversity_small_epsilon_example() {
        // Predictions pick one short and one long item.
        let items = vec![
            item(0.0, 0.0, 0.1),
            item(0.0, 0.0, 0.1),
            item(0.0, 0.0, 0.9),
            item(0.0, 0.0, 0.9),
        ];
        let preds = vec![vec![4.0, 1.0, 3.0, 2.0]];
        let cfg = ObjectiveConfig {
            k: 2,
            softtopk: SoftTopKConfig {
                epsilon: 1e-3,
                max_iters: 5000,
                tol: 1e-9,
            },
            ..ObjectiveConfig::default()
        };
        let (m, _) = sub_objectives(&preds, std::slice::from_ref(&items), &cfg).unwrap();
        // Normalized objective is twice the population std of {0.1, 0.9}.
        assert!((m[2] / 2.0 - 0.4).abs() < 1e-3, "{m:?}");
        let hard = hard_objective(&preds, &[items], &cfg).unwrap();
        assert!((hard.m3 - 0.8).abs() < 1e-12);
    }

    #[test]
    fn inverse_exponent_is_reciprocal_std() {
        let items = vec![item(0.0, 0.0, 0.1), item(0.0, 0.0, 0.9)];
        let cfg = ObjectiveConfig {
            k: 2,
            m3_exponent: M3Exponent::InvSqrt,
            ..ObjectiveConfig::default()
        };
        let b = hard_objective(&[vec![0.0, 1.0]], &[items], &cfg).unwrap();
        assert!((b.m3 - 2.5).abs() < 1e-12);
    }

    #[test]
    fn unbalanced_and_masked_weights() {
        let items = vec![item(0.5, 1.0, 0.2), item(0.1, 0.0, 0.8), item(0.3, 0.0, 0.4)];
        let cfg = ObjectiveConfig {
            k: 1,
            balancing: false,
            include: [true, false, true],
            ..ObjectiveConfig::default()
        };
        let b = hard_objective(&[vec![1.0, 0.0, -1.0]], &[items], &cfg).unwrap();
        assert_eq!(b.weights, [0.5, 0.0, 0.5]);
        assert!((b.total - 0.5 * (b.m1 + b.m3)).abs() < 1e-12);
    }

    #[test]
    fn errors() {
        let cfg = ObjectiveConfig::default();
        assert!(matches!(sub_objectives(&[], &[], &cfg), Err(Error::Argument(_))));
        assert!(matches!(
            sub_objectives(&[vec![1.0]], &[vec![item(0.0, 0.0, 0.0); 2]], &cfg),
            Err(Error::Shape(_))
        ));
        let bad = ObjectiveConfig {
            include: [false; 3],
            ..ObjectiveConfig::default()
        };
        assert!(bad.validate().is_err());
    }

    fn fd_check(preds: Vec<Vec<f64>>, lists: Vec<Vec<ListItem>>, cfg: &ObjectiveConfig) {
        let (b, grads) = objective_pred_grads(&preds, &lists, cfg).unwrap();
        let w = b.weights;
        let f = |p: &[Vec<f64>]| {
            let (m, _) = sub_objectives(p, &lists, cfg).unwrap();
            (0..3).map(|i| w[i] * m[i]).sum::<f64>()
        };
        let h = 1e-6;
        for u in 0..preds.len() {
            for j in 0..preds[u].len() {
                let mut p = preds.clone();
                p[u][j] += h;
                let up = f(&p);
                p[u][j] -= 2.0 * h;
                let down = f(&p);
                let fd = (up - down) / (2.0 * h);
                let g = grads[u][j];
                assert!(
                    (fd - g).abs() <= 1e-3 * fd.abs().max(g.abs()).max(1e-4),
                    "user {u} item {j}: fd {fd} vs {g}"
                );
            }
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        let lists = vec![
            vec![
                item(0.2, 1.0, 0.1),
                item(0.7, 0.0, 0.6),
                item(0.4, 1.0, 0.3),
                item(0.9, 0.0, 0.95),
                item(0.1, 0.0, 0.5),
            ],
            vec![item(0.3, 0.0, 0.2), item(0.6, 1.0, 0.8)],
        ];
        let preds = vec![vec![0.3, -0.2, 0.9, 0.1, 0.5], vec![1.0, 2.0]];
        let cfg = ObjectiveConfig {
            k: 2,
            tau: 0.7,
            softtopk: SoftTopKConfig {
                epsilon: 0.5,
                max_iters: 500,
                tol: 1e-12,
            },
            ..ObjectiveConfig::default()
        };
        fd_check(preds, lists, &cfg);
    }
}
