//! Scaling, balancing and the hard-selection oracle for the explicit-feedback objective.

use labelcraft::objectives::{balance, fit_scale, scale_value, sub_objectives, ListItem, ObjectiveConfig};
use labelcraft::softtopk::SoftTopKConfig;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::softtopk_suite::separated_scores;
use super::{Check, SuiteReport};

fn scale_checks(n: usize, rng: &mut ChaCha8Rng, report: &mut SuiteReport) {
    let mut endpoints = Check::new("scale endpoints |s(0)| + |s(v_max) - 1|", 1e-12);
    let mut knee = Check::new("scale knee gap between branches", 1e-6);
    let mut mono = Check::new("scale decrease along a grid", 1e-12);
    let mut unit = Check::new("scale outside [0, 1]", 1e-12);
    let mut head = Check::new("head image short of 1 - beta/100", 1e-12);
    for _ in 0..n {
        let len = rng.random_range(1..=50);
        let spread = rng.random_range(0.1..4.0);
        let values: Vec<f64> = (0..len)
            .map(|_| {
                if rng.random_bool(0.1) {
                    0.0
                } else {
                    (spread * rng.random_range(-2.0..2.0f64)).exp() * 30.0
                }
            })
            .collect();
        let beta = rng.random_range(1.0..99.0);
        let p = fit_scale(&values, beta).unwrap();
        if p.v_max > 0.0 {
            endpoints.record(scale_value(&p, 0.0).abs() + (scale_value(&p, p.v_max) - 1.0).abs());
        }
        if p.v_beta > 0.0 && p.v_max > p.v_beta {
            let d = 1e-9 * p.v_max;
            let below = scale_value(&p, p.v_beta);
            let above = scale_value(&p, p.v_beta + d);
            knee.record((below - p.beta_prime).abs() + (above - p.beta_prime).abs());
        }
        head.record(((1.0 - beta / 100.0) - p.beta_prime).max(0.0));
        let grid: Vec<f64> = (0..=200).map(|i| p.v_max * 1.2 * i as f64 / 200.0).collect();
        let ys: Vec<f64> = grid.iter().map(|&v| scale_value(&p, v)).collect();
        mono.record(ys.windows(2).map(|w| w[0] - w[1]).fold(0.0, f64::max));
        unit.record(ys.iter().map(|&y| (-y).max(y - 1.0)).fold(0.0, f64::max));
    }
    for c in [endpoints, knee, mono, unit, head] {
        report.push(c);
    }
}

fn balance_checks(n: usize, rng: &mut ChaCha8Rng, report: &mut SuiteReport) {
    let mut sum = Check::new("balance weight-sum error", 1e-12);
    let mut zero = Check::new("tau = 0 deviation from 1/3", 1e-12);
    let mut reversed = Check::new("balance order violations", 0.5);
    let mut total = Check::new("balance total mismatch", 1e-12);
    for _ in 0..n {
        let m = [
            rng.random_range(0.0..1.0),
            rng.random_range(0.0..1.0),
            rng.random_range(0.0..1.0),
        ];
        let tau = rng.random_range(0.01..5.0);
        let (w, t) = balance(m, tau);
        sum.record((w.iter().sum::<f64>() - 1.0).abs());
        total.record((t - (0..3).map(|i| w[i] * m[i]).sum::<f64>()).abs());
        let mut bad = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                if m[i] < m[j] && w[i] <= w[j] {
                    bad = 1.0;
                }
            }
        }
        let argmin = (0..3).min_by(|&a, &b| m[a].total_cmp(&m[b])).unwrap();
        let argmax_w = (0..3).max_by(|&a, &b| w[a].total_cmp(&w[b])).unwrap();
        if m[argmin] < m[argmax_w] {
            bad = 1.0;
        }
        reversed.record(bad);
        let (w0, t0) = balance(m, 0.0);
        zero.record(
            w0.iter().map(|x| (x - 1.0 / 3.0).abs()).fold(0.0, f64::max) + (t0 - m.iter().sum::<f64>() / 3.0).abs(),
        );
    }
    for c in [sum, zero, reversed, total] {
        report.push(c);
    }
}

/// Exhaustive search over every size-`k'` subset for the highest score sum.
fn brute_force_m2(preds: &[Vec<f64>], lists: &[Vec<ListItem>], k: usize) -> f64 {
    let mut total = 0.0;
    for (p, items) in preds.iter().zip(lists) {
        let n = p.len();
        let kk = k.min(n);
        let mut best = (f64::NEG_INFINITY, 0.0);
        for mask in 0u32..(1 << n) {
            if mask.count_ones() as usize != kk {
                continue;
            }
            let chosen = (0..n).filter(|i| mask & (1 << i) != 0);
            let score: f64 = chosen.clone().map(|i| p[i]).sum();
            if score > best.0 {
                best = (score, chosen.map(|i| items[i].explicit).sum::<f64>() / kk as f64);
            }
        }
        total += best.1;
    }
    total / preds.len() as f64
}

fn m2_oracle_check(n: usize, rng: &mut ChaCha8Rng) -> Check {
    let mut c = Check::new("soft M2 at epsilon 1e-4 vs brute-force hard oracle", 1e-3);
    for _ in 0..n {
        let users = rng.random_range(1..=3);
        let mut preds = Vec::new();
        let mut lists = Vec::new();
        for _ in 0..users {
            let len = rng.random_range(1..=8);
            preds.push(separated_scores(len, 0.05, rng));
            lists.push(
                (0..len)
                    .map(|_| ListItem {
                        watch: rng.random_range(0.0..1.0),
                        explicit: f64::from(u8::from(rng.random_bool(0.5))),
                        duration: rng.random_range(0.0..1.0),
                    })
                    .collect::<Vec<_>>(),
            );
        }
        let k = rng.random_range(1..=8);
        let cfg = ObjectiveConfig {
            k,
            softtopk: SoftTopKConfig {
                epsilon: 1e-4,
                max_iters: 50_000,
                tol: 1e-9,
            },
            ..ObjectiveConfig::default()
        };
        let (m, _) = sub_objectives(&preds, &lists, &cfg).unwrap();
        c.record((m[1] - brute_force_m2(&preds, &lists, k)).abs());
    }
    c
}

pub fn objective_suite(n: usize) -> SuiteReport {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let mut report = SuiteReport::default();
    scale_checks(n, &mut rng, &mut report);
    balance_checks(n, &mut rng, &mut report);
    report.push(m2_oracle_check(n.min(300), &mut rng));
    report
}
