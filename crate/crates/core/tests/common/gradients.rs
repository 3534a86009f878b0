//! Analytic gradients against central finite differences on small random instances.

use std::sync::Arc;

use labelcraft::model::{
    sgd_step, FeedbackScalers, LabelInputSpec, LabelingModel, LabelingSpec, RecInput, RecommenderModel, RecommenderSpec,
};
use labelcraft::objectives::{fit_scale, objective_pred_grads, sub_objectives, ListItem, M3Exponent, ObjectiveConfig};
use labelcraft::softtopk::{soft_topk, soft_topk_vjp, SoftTopKConfig};
use labelcraft::trainer::{hypergradient, inner_loss_grad, TrainConfig, TrainSample};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{central_diff, max_rel_err, Check, SuiteReport};

pub const MODEL_LIMIT: f64 = 1e-4;
pub const CHAIN_LIMIT: f64 = 1e-3;
const FLOOR: f64 = 1e-6;
const MAX_PARAMS: usize = 100;

fn random_recommender(rng: &mut ChaCha8Rng) -> RecommenderModel {
    loop {
        let n_categorical = rng.random_range(0..=1);
        let spec = RecommenderSpec {
            n_users: rng.random_range(1..=3),
            n_items: rng.random_range(2..=4),
            emb_dim: rng.random_range(1..=2),
            cat_table_size: if n_categorical > 0 { 3 } else { 0 },
            n_categorical,
            n_numeric: rng.random_range(0..=2),
            use_history: rng.random_bool(0.5),
            interactions: rng.random_bool(0.5),
            hidden: match rng.random_range(0..3) {
                0 => vec![],
                1 => vec![rng.random_range(2..=4)],
                _ => vec![3, 2],
            },
        };
        let mut m = RecommenderModel::init(spec, rng);
        if m.params.len() <= MAX_PARAMS {
            jitter(&mut m.params.values, rng);
            return m;
        }
    }
}

fn random_input(spec: &RecommenderSpec, rng: &mut ChaCha8Rng) -> RecInput {
    let history: Vec<usize> = if spec.use_history {
        (0..rng.random_range(0..=3))
            .map(|_| rng.random_range(0..spec.n_items))
            .collect()
    } else {
        Vec::new()
    };
    RecInput {
        user: rng.random_range(0..spec.n_users),
        item: rng.random_range(0..spec.n_items),
        categorical: (0..spec.n_categorical)
            .map(|_| rng.random_range(0..spec.cat_table_size))
            .collect(),
        history: Arc::from(history),
        numeric: (0..spec.n_numeric).map(|_| rng.random_range(-1.0..1.0)).collect(),
    }
}

/// Recommender parameter gradient on `n` random architectures and inputs.
pub fn recommender_check(n: usize, seed: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut check = Check::new("recommender parameter gradient", MODEL_LIMIT);
    for _ in 0..n {
        let model = random_recommender(&mut rng);
        let x = random_input(&model.spec, &mut rng);
        let analytic = model.param_grad(&x).expect("valid input");
        let numeric = central_diff(&model.params.values, 1e-6, |p| {
            let mut q = model.params.clone();
            q.values.copy_from_slice(p);
            model.with_params(q).unwrap().forward(&x).unwrap()
        });
        check.record(max_rel_err(&analytic.values, &numeric, FLOOR));
    }
    check
}

fn random_labeler(rng: &mut ChaCha8Rng) -> LabelingModel {
    let input = loop {
        let spec = LabelInputSpec {
            use_watch_time: rng.random_bool(0.8),
            use_duration: rng.random_bool(0.8),
            use_explicit: rng.random_bool(0.8),
            n_numeric: rng.random_range(0..=2),
        };
        if spec.dim() > 0 {
            break spec;
        }
    };
    let hidden = match rng.random_range(0..3) {
        0 => vec![rng.random_range(2..=6)],
        1 => vec![4, 3],
        _ => vec![5, 4, 2],
    };
    let mut m = LabelingModel::init(LabelingSpec { input, hidden }, rng);
    jitter(&mut m.params.values, rng);
    m
}

/// Moves zero-initialised biases off zero so no pre-activation sits exactly on a ReLU kink.
fn jitter(values: &mut [f64], rng: &mut ChaCha8Rng) {
    for v in values {
        *v += rng.random_range(-0.1..0.1);
    }
}

/// Labeling-network parameter gradient through the sigmoid head.
pub fn labeling_check(n: usize, seed: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut check = Check::new("labeling parameter gradient", MODEL_LIMIT);
    for _ in 0..n {
        let model = random_labeler(&mut rng);
        let input: Vec<f64> = (0..model.spec.input.dim())
            .map(|_| rng.random_range(-1.0..1.0))
            .collect();
        let mut analytic = vec![0.0; model.params.len()];
        model.accumulate_grad(&input, 1.0, &mut analytic);
        let numeric = central_diff(&model.params.values, 1e-6, |p| {
            let mut q = model.params.clone();
            q.values.copy_from_slice(p);
            model.with_params(q).unwrap().forward_input(&input)
        });
        check.record(max_rel_err(&analytic, &numeric, FLOOR));
    }
    check
}

fn distinct_scores(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    loop {
        let s: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
        let mut t = s.clone();
        t.sort_by(f64::total_cmp);
        if t.windows(2).all(|w| w[1] - w[0] > 0.02) {
            return s;
        }
    }
}

/// Soft top-k vector-Jacobian product, anchors included.
pub fn softtopk_vjp_check(n: usize, seed: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut check = Check::new("soft top-k VJP", CHAIN_LIMIT);
    for _ in 0..n {
        let len = rng.random_range(2..=8);
        let k = rng.random_range(1..len);
        let cfg = SoftTopKConfig {
            epsilon: rng.random_range(0.05..1.0),
            max_iters: 5000,
            tol: 1e-13,
        };
        let s = distinct_scores(len, &mut rng);
        let up: Vec<f64> = (0..len).map(|_| rng.random_range(-1.0..1.0)).collect();
        let res = soft_topk(&s, k, &cfg).unwrap();
        let analytic = soft_topk_vjp(&res, &s, &up).unwrap();
        let numeric = central_diff(&s, 1e-6, |p| {
            let a = soft_topk(p, k, &cfg).unwrap().alpha;
            a.iter().zip(&up).map(|(x, u)| x * u).sum()
        });
        check.record(max_rel_err(&analytic, &numeric, FLOOR));
    }
    check
}

fn random_lists(users: usize, rng: &mut ChaCha8Rng) -> (Vec<Vec<f64>>, Vec<Vec<ListItem>>) {
    let mut preds = Vec::new();
    let mut lists = Vec::new();
    for _ in 0..users {
        let n = rng.random_range(2..=6);
        preds.push(distinct_scores(n, rng));
        lists.push(
            (0..n)
                .map(|_| ListItem {
                    watch: rng.random_range(0.0..1.0),
                    explicit: f64::from(u8::from(rng.random_bool(0.4))),
                    duration: rng.random_range(0.0..1.0),
                })
                .collect(),
        );
    }
    (preds, lists)
}

fn tight_objective(k: usize, rng: &mut ChaCha8Rng) -> ObjectiveConfig {
    ObjectiveConfig {
        k,
        tau: rng.random_range(0.0..2.0),
        softtopk: SoftTopKConfig {
            epsilon: rng.random_range(0.2..1.0),
            max_iters: 5000,
            tol: 1e-13,
        },
        m3_exponent: if rng.random_bool(0.25) {
            M3Exponent::InvSqrt
        } else {
            M3Exponent::Sqrt
        },
        include: [true; 3],
        balancing: true,
    }
}

fn weighted(m: [f64; 3], w: [f64; 3]) -> f64 {
    (0..3).map(|i| w[i] * m[i]).sum()
}

/// Merged objective gradient w.r.t. predictions, weights held constant.
pub fn objective_check(n: usize, seed: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut check = Check::new("objective prediction gradient", CHAIN_LIMIT);
    for _ in 0..n {
        let users = rng.random_range(1..=3);
        let (preds, lists) = random_lists(users, &mut rng);
        let cfg = tight_objective(rng.random_range(1..=3), &mut rng);
        let (bd, grads) = objective_pred_grads(&preds, &lists, &cfg).unwrap();
        let flat: Vec<f64> = preds.iter().flatten().copied().collect();
        let numeric = central_diff(&flat, 1e-6, |p| {
            let mut it = p.iter().copied();
            let perturbed: Vec<Vec<f64>> = preds
                .iter()
                .map(|u| u.iter().map(|_| it.next().unwrap()).collect())
                .collect();
            weighted(sub_objectives(&perturbed, &lists, &cfg).unwrap().0, bd.weights)
        });
        let analytic: Vec<f64> = grads.into_iter().flatten().collect();
        check.record(max_rel_err(&analytic, &numeric, FLOOR));
    }
    check
}

/// Full meta-step hypergradient w.r.t. the labeling parameters.
pub fn hypergradient_check(n: usize, seed: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut check = Check::new("meta-step hypergradient", CHAIN_LIMIT);
    let scalers = FeedbackScalers {
        watch: fit_scale(&[0.0, 5.0, 10.0, 40.0, 90.0], 80.0).unwrap(),
        duration: fit_scale(&[10.0, 30.0, 60.0, 120.0], 80.0).unwrap(),
    };
    for _ in 0..n {
        let rec = loop {
            let r = random_recommender(&mut rng);
            if r.params.len() <= 50 {
                break r;
            }
        };
        let labeler = loop {
            let l = random_labeler(&mut rng);
            if l.params.len() <= 50 {
                break l.with_scalers(scalers);
            }
        };
        let dim = labeler.spec.input.dim();
        let samples: Vec<TrainSample> = (0..rng.random_range(2..=6))
            .map(|_| TrainSample {
                input: random_input(&rec.spec, &mut rng),
                label_input: (0..dim).map(|_| rng.random_range(0.0..1.0)).collect(),
            })
            .collect();
        let batch: Vec<&TrainSample> = samples.iter().collect();
        let users = rng.random_range(1..=2);
        let (_, lists) = random_lists(users, &mut rng);
        let meta: Vec<Vec<RecInput>> = lists
            .iter()
            .map(|l| (0..l.len()).map(|_| random_input(&rec.spec, &mut rng)).collect())
            .collect();
        let meta_refs: Vec<&[RecInput]> = meta.iter().map(Vec::as_slice).collect();
        let mut cfg = TrainConfig {
            eta1: rng.random_range(0.2..1.0),
            lambda: if rng.random_bool(0.5) { 0.0 } else { 1e-2 },
            ..TrainConfig::default()
        };
        cfg.objective = tight_objective(rng.random_range(1..=2), &mut rng);

        let out = hypergradient(&rec, &labeler, &batch, &meta_refs, &lists, &cfg).unwrap();
        let w = out.objective.weights;
        let numeric = central_diff(&labeler.params.values, 1e-6, |p| {
            let mut q = labeler.params.clone();
            q.values.copy_from_slice(p);
            let l = labeler.with_params(q).unwrap();
            let inner = inner_loss_grad(&rec, &l, &batch, cfg.lambda).unwrap();
            let t = rec
                .with_params(sgd_step(&rec.params, &inner.grad, cfg.eta1).unwrap())
                .unwrap();
            let preds: Vec<Vec<f64>> = meta
                .iter()
                .map(|u| u.iter().map(|x| t.forward(x).unwrap()).collect())
                .collect();
            weighted(sub_objectives(&preds, &lists, &cfg.objective).unwrap().0, w)
        });
        check.record(max_rel_err(&out.grad_phi.values, &numeric, FLOOR));
    }
    check
}

/// All gradient checks; `n` instances each.
pub fn gradient_suite(n: usize) -> SuiteReport {
    let mut r = SuiteReport::default();
    r.push(recommender_check(n, 11));
    r.push(labeling_check(n, 12));
    r.push(softtopk_vjp_check(n, 13));
    r.push(objective_check(n, 14));
    r.push(hypergradient_check(n, 15));
    r
}
