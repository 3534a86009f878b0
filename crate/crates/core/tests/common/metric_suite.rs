//! Ranking metrics over every permutation of short candidate lists.

use labelcraft::eval::{ds_at_k, neg_at_k, nwtg_at_k};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Check, SuiteReport};

/// Heap's algorithm; calls `visit` with every permutation of `0..n`.
pub fn for_each_permutation(n: usize, mut visit: impl FnMut(&[usize])) {
    let mut p: Vec<usize> = (0..n).collect();
    let mut c = vec![0usize; n];
    visit(&p);
    let mut i = 0;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                p.swap(0, i);
            } else {
                p.swap(c[i], i);
            }
            visit(&p);
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
}

struct MetricChecks {
    oracle: Check,
    range: Check,
    swap: Check,
}

/// Checks one gain vector under every ordering; `metric(order, k)` scores a ranking.
fn check_gains(gains: &[f64], metric: &dyn Fn(&[usize], usize) -> Option<f64>, out: &mut MetricChecks) {
    let n = gains.len();
    let mut sorted: Vec<usize> = (0..n).collect();
    sorted.sort_by(|&a, &b| gains[b].total_cmp(&gains[a]));
    let any_gain = gains.iter().any(|&g| g > 0.0);
    for k in 1..=n + 1 {
        match metric(&sorted, k) {
            Some(v) => out.oracle.record((v - 1.0).abs()),
            None => out.oracle.record(if any_gain { 1.0 } else { 0.0 }),
        }
        for_each_permutation(n, |perm| {
            let Some(v) = metric(perm, k) else {
                out.range.record(if any_gain { 1.0 } else { 0.0 });
                return;
            };
            out.range.record((-v).max(v - 1.0).max(0.0));
            // Moving a strictly better item up one place never lowers the metric.
            for pos in 0..n.saturating_sub(1) {
                let (a, b) = (perm[pos], perm[pos + 1]);
                if gains[b] > gains[a] {
                    let mut q = perm.to_vec();
                    q.swap(pos, pos + 1);
                    let w = metric(&q, k).expect("same candidates");
                    out.swap.record((v - w).max(0.0));
                }
            }
        });
    }
}

pub fn metric_suite(seed_lists: usize) -> SuiteReport {
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    let mut nwtg = MetricChecks {
        oracle: Check::new("NWTG oracle ranking deviation from 1", 1e-12),
        range: Check::new("NWTG outside [0, 1]", 1e-12),
        swap: Check::new("NWTG decrease after promoting a better item", 1e-12),
    };
    let mut neg = MetricChecks {
        oracle: Check::new("NEG oracle ranking deviation from 1", 1e-12),
        range: Check::new("NEG outside [0, 1]", 1e-12),
        swap: Check::new("NEG decrease after promoting a better item", 1e-12),
    };
    let mut ds = Check::new("DS ordering-invariance within the top k", 1e-9);

    for n in 1..=5usize {
        for _ in 0..seed_lists {
            let watch: Vec<f64> = (0..n)
                .map(|_| {
                    if rng.random_bool(0.2) {
                        0.0
                    } else {
                        rng.random_range(0.0..100.0)
                    }
                })
                .collect();
            let metric = |order: &[usize], k: usize| {
                let ranked: Vec<f64> = order.iter().map(|&i| watch[i]).collect();
                nwtg_at_k(&ranked, &watch, k)
            };
            check_gains(&watch, &metric, &mut nwtg);

            let durations: Vec<f64> = (0..n).map(|_| rng.random_range(1.0..300.0)).collect();
            for k in 1..=n {
                let mut base: Option<f64> = None;
                for_each_permutation(n, |perm| {
                    // Same top-k set in a different order must give the same DS.
                    let mut top: Vec<usize> = perm[..k].to_vec();
                    top.sort_unstable();
                    if top != (0..k).collect::<Vec<_>>() {
                        return;
                    }
                    let ranked: Vec<f64> = perm.iter().map(|&i| durations[i]).collect();
                    let v = ds_at_k(&ranked, k);
                    match base {
                        None => base = Some(v),
                        Some(b) => ds.record((v - b).abs()),
                    }
                });
            }
        }
        for mask in 0u32..(1 << n) {
            let flags: Vec<[u8; 3]> = (0..n)
                .map(|i| {
                    let on = u8::from(mask & (1 << i) != 0);
                    [0, on, 0]
                })
                .collect();
            let gains: Vec<f64> = flags.iter().map(|f| f64::from(f[1])).collect();
            let metric = |order: &[usize], k: usize| {
                let ranked: Vec<[u8; 3]> = order.iter().map(|&i| flags[i]).collect();
                neg_at_k(&ranked, &flags, k)
            };
            check_gains(&gains, &metric, &mut neg);
        }
    }

    let mut report = SuiteReport::default();
    for c in [nwtg.oracle, nwtg.range, nwtg.swap, neg.oracle, neg.range, neg.swap, ds] {
        report.push(c);
    }
    let mut worked = Check::new("worked examples 0.8597, 0.6934 and DS = 10", 1e-4);
    worked.record((nwtg_at_k(&[5.0, 10.0], &[10.0, 5.0], 2).unwrap() - 0.8597).abs());
    worked.record(
        (neg_at_k(
            &[[0, 0, 0], [1, 0, 0], [0, 1, 1]],
            &[[1, 0, 0], [0, 0, 0], [0, 1, 1]],
            3,
        )
        .unwrap()
            - 0.6934)
            .abs(),
    );
    worked.record((ds_at_k(&[10.0, 30.0], 2) - 10.0).abs());
    report.push(worked);
    report
}
