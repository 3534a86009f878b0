//! Hard-ranking evaluation over each user's own test interactions.
//!
//! Every user's candidates are ranked by model score (ties to the lower item
//! id) and the top `k' = min(k, n)` are scored with NWTG@k, NEG@k and DS@k.
//! Users whose ideal gain is zero are left out of the corresponding average.

mod metrics;

pub use metrics::{dcg, ds_at_k, neg_at_k, nwtg_at_k, rank_order};

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::data::{group_by_user, InteractionRecord, N_EXPLICIT};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    /// `counts.len() + 1` ascending edges; the last bin is closed on the right.
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
}

impl Histogram {
    pub fn new(edges: Vec<f64>) -> Result<Self> {
        if edges.len() < 2 || edges.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::Argument(
                "histogram needs at least two strictly increasing edges".into(),
            ));
        }
        let bins = edges.len() - 1;
        Ok(Histogram {
            edges,
            counts: vec![0; bins],
        })
    }

    /// Values outside the edge range land in the nearest end bin.
    pub fn add(&mut self, v: f64) {
        let bins = self.counts.len();
        let i = self.edges[1..bins].partition_point(|&e| e <= v);
        self.counts[i] += 1;
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn proportions(&self) -> Vec<f64> {
        let t = self.total().max(1) as f64;
        self.counts.iter().map(|&c| c as f64 / t).collect()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("bin_edge,count\n");
        for (e, c) in self.edges.iter().zip(&self.counts) {
            let _ = writeln!(s, "{e:.6},{c}");
        }
        s
    }
}

/// Total-variation distance between the normalized counts of two histograms on the same edges.
pub fn tv_distance(a: &Histogram, b: &Histogram) -> Result<f64> {
    if a.edges != b.edges {
        return Err(Error::Shape("histograms use different edges".into()));
    }
    Ok(0.5
        * a.proportions()
            .iter()
            .zip(b.proportions())
            .map(|(x, y)| (x - y).abs())
            .sum::<f64>())
}

/// `bins` edges equally spaced in log-duration between the smallest and largest duration.
pub fn log_duration_edges(records: &[InteractionRecord], bins: usize) -> Result<Vec<f64>> {
    if bins == 0 || records.is_empty() {
        return Err(Error::Argument("need at least one bin and one record".into()));
    }
    let lo = records.iter().map(|r| r.duration).fold(f64::INFINITY, f64::min);
    let hi = records.iter().map(|r| r.duration).fold(f64::NEG_INFINITY, f64::max);
    let (lo, hi) = (lo.ln(), if hi > lo { hi.ln() } else { (lo * 2.0).ln() });
    Ok((0..=bins)
        .map(|i| (lo + (hi - lo) * i as f64 / bins as f64).exp())
        .collect())
}

/// Durations of every user's top-`min(k, n)` list pooled into `edges`.
pub fn duration_histogram(ranked: &[RankedUser<'_>], k: usize, edges: Vec<f64>) -> Result<Histogram> {
    let mut h = Histogram::new(edges)?;
    for u in ranked {
        for r in u.top(k) {
            h.add(r.duration);
        }
    }
    Ok(h)
}

/// One user's candidates in ranked order.
#[derive(Debug, Clone)]
pub struct RankedUser<'a> {
    pub user_id: u64,
    pub ranked: Vec<&'a InteractionRecord>,
}

impl<'a> RankedUser<'a> {
    pub fn top(&self, k: usize) -> &[&'a InteractionRecord] {
        &self.ranked[..k.min(self.ranked.len())]
    }
}

/// Groups `records` by user and ranks each group with `score`.
pub fn rank_users<'a, F>(records: &'a [InteractionRecord], mut score: F) -> Result<Vec<RankedUser<'a>>>
where
    F: FnMut(&InteractionRecord) -> Result<f64>,
{
    group_by_user(records)
        .into_iter()
        .map(|(user_id, group)| {
            let scores = group.iter().map(|r| score(r)).collect::<Result<Vec<f64>>>()?;
            let ids: Vec<u64> = group.iter().map(|r| r.item_id).collect();
            let ranked = rank_order(&scores, &ids).into_iter().map(|i| group[i]).collect();
            Ok(RankedUser { user_id, ranked })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub method: String,
    pub k: usize,
    pub nwtg: f64,
    pub neg: f64,
    pub ds: f64,
    pub users_nwtg: usize,
    pub users_neg: usize,
    pub users_ds: usize,
    /// Users with fewer than `k` candidates, scored at their list length.
    pub users_short: usize,
    pub duration_histogram: Histogram,
    /// Histogram of every candidate's duration on the same edges.
    pub pool_histogram: Histogram,
    /// Total-variation distance between the two histograms.
    pub tv_to_pool: f64,
    /// DS@k uses the population standard deviation in seconds.
    pub ds_convention: String,
}

/// Ranks each user's test interactions with `score` and averages the three metrics.
pub fn evaluate<F>(
    method: &str,
    test: &[InteractionRecord],
    k: usize,
    edges: Vec<f64>,
    score: F,
) -> Result<MetricsReport>
where
    F: FnMut(&InteractionRecord) -> Result<f64>,
{
    if test.is_empty() {
        return Err(Error::Argument("cannot evaluate on an empty test part".into()));
    }
    if k == 0 {
        return Err(Error::Argument("k must be >= 1".into()));
    }
    let users = rank_users(test, score)?;
    let mut sums = [0.0f64; 3];
    let mut counts = [0usize; 3];
    let mut short = 0;
    for u in &users {
        if u.ranked.len() < k {
            short += 1;
        }
        let watch: Vec<f64> = u.ranked.iter().map(|r| r.watch_time).collect();
        let explicit: Vec<[u8; N_EXPLICIT]> = u.ranked.iter().map(|r| r.explicit).collect();
        let durations: Vec<f64> = u.ranked.iter().map(|r| r.duration).collect();
        if let Some(v) = nwtg_at_k(&watch, &watch, k) {
            sums[0] += v;
            counts[0] += 1;
        }
        if let Some(v) = neg_at_k(&explicit, &explicit, k) {
            sums[1] += v;
            counts[1] += 1;
        }
        sums[2] += ds_at_k(&durations, k);
        counts[2] += 1;
    }
    let mean = |i: usize| if counts[i] > 0 { sums[i] / counts[i] as f64 } else { 0.0 };
    let duration_histogram = duration_histogram(&users, k, edges.clone())?;
    let mut pool_histogram = Histogram::new(edges)?;
    for r in test {
        pool_histogram.add(r.duration);
    }
    let tv_to_pool = tv_distance(&duration_histogram, &pool_histogram)?;
    Ok(MetricsReport {
        method: method.to_string(),
        k,
        nwtg: mean(0),
        neg: mean(1),
        ds: mean(2),
        users_nwtg: counts[0],
        users_neg: counts[1],
        users_ds: counts[2],
        users_short: short,
        duration_histogram,
        pool_histogram,
        tv_to_pool,
        ds_convention: "population std of raw durations (seconds)".into(),
    })
}

/// One row per report with relative improvement of `reference` over each method.
///
/// `ri_x = (x_reference - x_method) / x_method`, empty when the method's value is 0.
pub fn comparison_csv(reports: &[MetricsReport], reference: &str) -> Result<String> {
    let refr = reports
        .iter()
        .find(|r| r.method == reference)
        .ok_or_else(|| Error::Argument(format!("reference method '{reference}' not among the reports")))?;
    let ri = |own: f64, of_ref: f64| {
        if own != 0.0 {
            format!("{:.6}", (of_ref - own) / own)
        } else {
            String::new()
        }
    };
    let mut s = String::from("method,k,nwtg,neg,ds,tv_to_pool,ri_nwtg,ri_neg,ri_ds,users\n");
    for r in reports {
        let _ = writeln!(
            s,
            "{},{},{:.6},{:.6},{:.6},{:.6},{},{},{},{}",
            r.method,
            r.k,
            r.nwtg,
            r.neg,
            r.ds,
            r.tv_to_pool,
            ri(r.nwtg, refr.nwtg),
            ri(r.neg, refr.neg),
            ri(r.ds, refr.ds),
            r.users_ds
        );
    }
    Ok(s)
}
