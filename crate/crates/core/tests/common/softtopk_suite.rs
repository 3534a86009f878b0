//! Mass, range, ordering and limit behaviour of the soft top-k operator.

use labelcraft::softtopk::{hard_topk, soft_topk, SoftTopKConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Check, SuiteReport};

/// `n` scores on a grid with spacing at least `gap * range`, in random order.
pub fn separated_scores(n: usize, gap: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let slots = (1.0 / gap).floor() as usize + 1;
    assert!(slots >= n);
    let picks = rand::seq::index::sample(rng, slots, n).into_vec();
    let scale = rng.random_range(0.1..10.0);
    let shift = rng.random_range(-5.0..5.0);
    picks.into_iter().map(|p| shift + scale * p as f64 * gap).collect()
}

pub fn softtopk_suite(n: usize) -> SuiteReport {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let mut report = SuiteReport::default();
    let mut mass = Check::new("mass |sum(alpha) - k| / n on converged solves", 1e-5);
    let mut range = Check::new(
        "range violation below 0 or above 1 + n * tol on converged solves",
        1e-12,
    );
    let mut order = Check::new("ordering violation alpha_j - alpha_i for s_i > s_j", 1e-9);
    let mut limit = Check::new("small-epsilon deviation from hard top-k", 0.05);
    let mut converged = 0usize;

    for _ in 0..n {
        let len = rng.random_range(2..=30);
        let k = rng.random_range(1..=len);
        let cfg = SoftTopKConfig {
            epsilon: [0.01, 0.1, 1.0][rng.random_range(0..3)],
            max_iters: 1000,
            tol: 1e-6,
        };
        let s: Vec<f64> = (0..len).map(|_| rng.random_range(-3.0..3.0)).collect();
        let res = soft_topk(&s, k, &cfg).unwrap();
        if res.converged {
            // Converged rows carry mass within tol of 1/n, so alpha_i <= 1 + n * tol.
            let slack = len as f64 * cfg.tol;
            let lo = res.alpha.iter().fold(0.0f64, |acc, a| acc.max(-a));
            let hi = res.alpha.iter().fold(0.0f64, |acc, a| acc.max(a - 1.0 - slack));
            range.record(lo.max(hi));
            converged += 1;
            let total: f64 = res.alpha.iter().sum();
            mass.record((total - k as f64).abs() / len as f64);
            let mut worst = 0.0f64;
            for i in 0..len {
                for j in 0..len {
                    if s[i] > s[j] {
                        worst = worst.max(res.alpha[j] - res.alpha[i]);
                    }
                }
            }
            order.record(worst);
        }

        let len = rng.random_range(2..=8);
        let k = rng.random_range(1..=len);
        let s = separated_scores(len, 0.02, &mut rng);
        let (lo, hi) = s
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
        let cfg = SoftTopKConfig {
            epsilon: 1e-3 * (hi - lo).powi(2),
            max_iters: 20_000,
            tol: 1e-9,
        };
        let soft = soft_topk(&s, k, &cfg).unwrap();
        let hard = hard_topk(&s, k).unwrap();
        limit.record(
            soft.alpha
                .iter()
                .zip(&hard)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max),
        );
    }
    report.push(mass);
    report.push(range);
    report.push(order);
    report.push(limit);
    report.flag("some random solves converge", converged > 0);

    let full = soft_topk(&[0.3, -2.0, 7.0], 3, &SoftTopKConfig::default()).unwrap();
    report.flag("n = k selects everything", full.alpha == vec![1.0; 3]);
    let wide = soft_topk(
        &[0.0, 1.0],
        1,
        &SoftTopKConfig {
            epsilon: 1e3,
            max_iters: 1000,
            tol: 1e-12,
        },
    )
    .unwrap();
    report.flag(
        "large epsilon gives (0.5, 0.5)",
        wide.alpha.iter().all(|a| (a - 0.5).abs() < 1e-3),
    );
    let sharp = soft_topk(
        &[3.0, 1.0, 2.0],
        1,
        &SoftTopKConfig {
            epsilon: 1e-3,
            max_iters: 20_000,
            tol: 1e-9,
        },
    )
    .unwrap();
    report.flag(
        "small epsilon on (3, 1, 2) gives (1, 0, 0)",
        sharp
            .alpha
            .iter()
            .zip([1.0, 0.0, 0.0])
            .all(|(a, b)| (a - b).abs() < 1e-2),
    );
    report
}
