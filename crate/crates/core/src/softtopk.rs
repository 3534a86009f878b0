//! Differentiable top-k membership via entropic optimal transport.
//!
//! The `n` scores are source points with mass `1/n` each; the targets are two
//! anchors, the minimum and the maximum score, with masses `(n-k)/n` and
//! `k/n`. Costs are squared distances. Log-domain Sinkhorn solves the
//! entropic problem; the membership weight of item `i` is `n` times the mass
//! it sends to the max anchor. The backward pass replays the recorded Sinkhorn
//! iterations in reverse, including the (almost-everywhere) dependence of the
//! anchors on the extreme scores.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SoftTopKConfig {
    pub epsilon: f64,
    pub max_iters: usize,
    /// L1 tolerance on the row marginals.
    pub tol: f64,
}

impl Default for SoftTopKConfig {
    fn default() -> Self {
        SoftTopKConfig {
            epsilon: 0.1,
            max_iters: 200,
            tol: 1e-6,
        }
    }
}

impl SoftTopKConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::Argument(format!("epsilon must be > 0, got {}", self.epsilon)));
        }
        if self.max_iters == 0 {
            return Err(Error::Argument("max_iters must be >= 1".into()));
        }
        if !(self.tol > 0.0) {
            return Err(Error::Argument("tol must be > 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Solve {
    /// `k == n`: everything selected.
    Full,
    /// All scores equal: uniform `k/n`.
    Flat,
    Sinkhorn,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SoftTopKResult {
    /// Membership weights, summing to `k`.
    pub alpha: Vec<f64>,
    /// Transport plan rows `[to min anchor, to max anchor]`.
    pub plan: Vec<[f64; 2]>,
    pub converged: bool,
    pub iterations: usize,
    pub k: usize,
    solve: Solve,
    epsilon: f64,
    anchors: [f64; 2],
    /// Column potentials the logged iterations start from.
    g_init: [f64; 2],
    /// Dual potentials after each iteration; `g` entries follow their `f`.
    f_log: Vec<Vec<f64>>,
    g_log: Vec<[f64; 2]>,
}

fn check_args(scores: &[f64], k: usize) -> Result<()> {
    let n = scores.len();
    if k == 0 || k > n {
        return Err(Error::Argument(format!("top-k requires 1 <= k <= n, got k={k}, n={n}")));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::Argument("scores must be finite".into()));
    }
    Ok(())
}

fn logsumexp2(a: f64, b: f64) -> f64 {
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

fn logsumexp(xs: impl Iterator<Item = f64> + Clone) -> f64 {
    let m = xs.clone().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + xs.map(|x| (x - m).exp()).sum::<f64>().ln()
}

fn argmin_argmax(scores: &[f64]) -> (usize, usize) {
    let mut lo = 0;
    let mut hi = 0;
    for (i, &s) in scores.iter().enumerate() {
        if s < scores[lo] {
            lo = i;
        }
        if s > scores[hi] {
            hi = i;
        }
    }
    (lo, hi)
}

/// Epsilon below this fraction of the squared score range is reached by annealing.
const ANNEAL_BELOW: f64 = 1e-3;
/// Annealing starts at this fraction of the squared score range.
const ANNEAL_START: f64 = 0.1;
const ANNEAL_FACTOR: f64 = 0.5;
const ANNEAL_ITERS: usize = 50;

pub fn soft_topk(scores: &[f64], k: usize, cfg: &SoftTopKConfig) -> Result<SoftTopKResult> {
    check_args(scores, k)?;
    cfg.validate()?;
    let n = scores.len();
    let nf = n as f64;
    let base = SoftTopKResult {
        alpha: Vec::new(),
        plan: Vec::new(),
        converged: true,
        iterations: 0,
        k,
        solve: Solve::Full,
        epsilon: cfg.epsilon,
        anchors: [0.0; 2],
        g_init: [0.0; 2],
        f_log: Vec::new(),
        g_log: Vec::new(),
    };
    if k == n {
        return Ok(SoftTopKResult {
            alpha: vec![1.0; n],
            plan: vec![[0.0, 1.0 / nf]; n],
            ..base
        });
    }
    let (lo, hi) = argmin_argmax(scores);
    let anchors = [scores[lo], scores[hi]];
    let kf = k as f64;
    if anchors[0] == anchors[1] {
        return Ok(SoftTopKResult {
            alpha: vec![kf / nf; n],
            plan: vec![[(nf - kf) / (nf * nf), kf / (nf * nf)]; n],
            solve: Solve::Flat,
            anchors,
            ..base
        });
    }

    let eps = cfg.epsilon;
    let cost: Vec<[f64; 2]> = scores
        .iter()
        .map(|&s| [(s - anchors[0]).powi(2), (s - anchors[1]).powi(2)])
        .collect();
    let log_mu = -nf.ln();
    let log_nu = [((nf - kf) / nf).ln(), (kf / nf).ln()];

    let sweep = |eps: f64, f: &mut [f64], g: &mut [f64; 2]| {
        for i in 0..n {
            f[i] = eps * log_mu - eps * logsumexp2((g[0] - cost[i][0]) / eps, (g[1] - cost[i][1]) / eps);
        }
        for j in 0..2 {
            g[j] = eps * log_nu[j] - eps * logsumexp((0..n).map(|i| (f[i] - cost[i][j]) / eps));
        }
    };

    let mut g = [0.0f64; 2];
    let mut f = vec![0.0f64; n];
    // Small epsilon converges slowly from a cold start; anneal the potentials
    // down from a coarse temperature first. Only the final-temperature
    // iterations are logged, so the backward pass treats `g_init` as fixed.
    let spread = (anchors[1] - anchors[0]).powi(2);
    let mut stage = if eps < ANNEAL_BELOW * spread {
        ANNEAL_START * spread
    } else {
        eps
    };
    while stage > eps {
        for _ in 0..ANNEAL_ITERS {
            sweep(stage, &mut f, &mut g);
        }
        stage *= ANNEAL_FACTOR;
    }
    let g_init = g;
    let mut f_log = Vec::new();
    let mut g_log = Vec::new();
    let mut best = (f64::INFINITY, 0usize);
    let mut converged = false;
    for _ in 0..cfg.max_iters {
        sweep(eps, &mut f, &mut g);
        f_log.push(f.clone());
        g_log.push(g);
        let err: f64 = (0..n)
            .map(|i| {
                let row = ((f[i] + g[0] - cost[i][0]) / eps).exp() + ((f[i] + g[1] - cost[i][1]) / eps).exp();
                (row - 1.0 / nf).abs()
            })
            .sum();
        if err < best.0 {
            best = (err, f_log.len());
        }
        if err <= cfg.tol {
            converged = true;
            break;
        }
    }
    // Fall back to the iterate with the smallest marginal error.
    f_log.truncate(best.1);
    g_log.truncate(best.1);
    let f = f_log.last().expect("at least one iteration");
    let g = g_log.last().expect("at least one iteration");
    let plan: Vec<[f64; 2]> = (0..n)
        .map(|i| {
            [
                ((f[i] + g[0] - cost[i][0]) / eps).exp(),
                ((f[i] + g[1] - cost[i][1]) / eps).exp(),
            ]
        })
        .collect();
    let alpha = plan.iter().map(|row| nf * row[1]).collect();
    Ok(SoftTopKResult {
        alpha,
        plan,
        converged,
        iterations: f_log.len(),
        solve: Solve::Sinkhorn,
        anchors,
        g_init,
        f_log,
        g_log,
        ..base
    })
}

/// Gradient of `upstreamᵀ alpha` w.r.t. the scores that produced `result`.
pub fn soft_topk_vjp(result: &SoftTopKResult, scores: &[f64], upstream: &[f64]) -> Result<Vec<f64>> {
    let n = scores.len();
    if upstream.len() != n || result.alpha.len() != n {
        return Err(Error::Shape(format!(
            "scores {n}, upstream {}, alpha {}",
            upstream.len(),
            result.alpha.len()
        )));
    }
    let mut ds = vec![0.0; n];
    if result.solve != Solve::Sinkhorn {
        return Ok(ds);
    }
    let eps = result.epsilon;
    let nf = n as f64;
    let a = result.anchors;
    let cost: Vec<[f64; 2]> = scores
        .iter()
        .map(|&s| [(s - a[0]).powi(2), (s - a[1]).powi(2)])
        .collect();
    let mut d_cost = vec![[0.0f64; 2]; n];

    // alpha_i = n * plan_i1, plan_ij = exp((f_i + g_j - C_ij) / eps).
    let mut df = vec![0.0f64; n];
    let mut dg = [0.0f64; 2];
    for i in 0..n {
        let gij = nf * upstream[i] * result.plan[i][1] / eps;
        df[i] += gij;
        dg[1] += gij;
        d_cost[i][1] -= gij;
    }

    let t_max = result.f_log.len();
    for t in (0..t_max).rev() {
        let f = &result.f_log[t];
        // g_j = eps log nu_j - eps LSE_i((f_i - C_ij)/eps)
        for j in 0..2 {
            if dg[j] == 0.0 {
                continue;
            }
            let lse = logsumexp((0..n).map(|i| (f[i] - cost[i][j]) / eps));
            for i in 0..n {
                let p = ((f[i] - cost[i][j]) / eps - lse).exp();
                df[i] -= dg[j] * p;
                d_cost[i][j] += dg[j] * p;
            }
        }
        // f_i = eps log mu - eps LSE_j((g_prev_j - C_ij)/eps), g_prev = g_init before the first iteration.
        let g_prev = if t == 0 { result.g_init } else { result.g_log[t - 1] };
        let mut dg_prev = [0.0f64; 2];
        for i in 0..n {
            if df[i] == 0.0 {
                continue;
            }
            let z0 = (g_prev[0] - cost[i][0]) / eps;
            let z1 = (g_prev[1] - cost[i][1]) / eps;
            let lse = logsumexp2(z0, z1);
            let q = [(z0 - lse).exp(), (z1 - lse).exp()];
            for j in 0..2 {
                dg_prev[j] -= df[i] * q[j];
                d_cost[i][j] += df[i] * q[j];
            }
            df[i] = 0.0;
        }
        dg = dg_prev;
    }

    // C_ij = (s_i - a_j)^2 with a_0 = min(s), a_1 = max(s).
    let mut d_anchor = [0.0f64; 2];
    for i in 0..n {
        for j in 0..2 {
            let dc = 2.0 * (scores[i] - a[j]) * d_cost[i][j];
            ds[i] += dc;
            d_anchor[j] -= dc;
        }
    }
    let (lo, hi) = argmin_argmax(scores);
    ds[lo] += d_anchor[0];
    ds[hi] += d_anchor[1];
    Ok(ds)
}

/// Exact top-k indicator; ties go to the lower index.
pub fn hard_topk(scores: &[f64], k: usize) -> Result<Vec<f64>> {
    let n = scores.len();
    if k == 0 || k > n {
        return Err(Error::Argument(format!("top-k requires 1 <= k <= n, got k={k}, n={n}")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    let mut out = vec![0.0; n];
    for &i in &order[..k] {
        out[i] = 1.0;
    }
    Ok(out)
}

/// Zero-mean, unit-variance (population) copy of `scores`; returns it with the std.
/// A zero std leaves the centered scores unscaled.
pub fn standardize(scores: &[f64]) -> (Vec<f64>, f64) {
    let n = scores.len().max(1) as f64;
    let mean = scores.iter().sum::<f64>() / n;
    let var = scores.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / n;
    let std = var.sqrt();
    let z = scores
        .iter()
        .map(|s| if std > 0.0 { (s - mean) / std } else { s - mean })
        .collect();
    (z, std)
}

/// Pulls a gradient w.r.t. standardized scores back to the raw scores.
pub fn standardize_vjp(z: &[f64], std: f64, dz: &[f64]) -> Vec<f64> {
    if std <= 0.0 {
        return vec![0.0; z.len()];
    }
    let n = z.len() as f64;
    let mean_dz = dz.iter().sum::<f64>() / n;
    let mean_dz_z = dz.iter().zip(z).map(|(a, b)| a * b).sum::<f64>() / n;
    z.iter()
        .zip(dz)
        .map(|(zi, di)| (di - mean_dz - zi * mean_dz_z) / std)
        .collect()
}
