use crate::data::N_EXPLICIT;

fn discount(rank: usize) -> f64 {
    // rank is 0-based; position i = rank + 1 is discounted by log2(i + 1).
    1.0 / ((rank + 2) as f64).log2()
}

/// Discounted cumulative gain of the first `k` gains.
pub fn dcg(gains: &[f64], k: usize) -> f64 {
    gains.iter().take(k).enumerate().map(|(i, g)| g * discount(i)).sum()
}

fn normalized(ranked: &[f64], candidates: &[f64], k: usize) -> Option<f64> {
    let k = k.min(candidates.len());
    let mut ideal = candidates.to_vec();
    ideal.sort_by(|a, b| b.total_cmp(a));
    let best = dcg(&ideal, k);
    if best <= 0.0 {
        return None;
    }
    Some(dcg(ranked, k) / best)
}

/// Normalized watch-time gain; `None` when every candidate has zero watch time.
pub fn nwtg_at_k(ranked_watch: &[f64], candidate_watch: &[f64], k: usize) -> Option<f64> {
    normalized(ranked_watch, candidate_watch, k)
}

fn indicator(e: &[u8; N_EXPLICIT]) -> f64 {
    if e.contains(&1) {
        1.0
    } else {
        0.0
    }
}

/// Normalized explicit-feedback gain; `None` when no candidate has positive feedback.
pub fn neg_at_k(ranked: &[[u8; N_EXPLICIT]], candidates: &[[u8; N_EXPLICIT]], k: usize) -> Option<f64> {
    let r: Vec<f64> = ranked.iter().map(indicator).collect();
    let c: Vec<f64> = candidates.iter().map(indicator).collect();
    normalized(&r, &c, k)
}

/// Population standard deviation of the first `min(k, n)` durations.
pub fn ds_at_k(ranked_durations: &[f64], k: usize) -> f64 {
    let top = &ranked_durations[..k.min(ranked_durations.len())];
    if top.is_empty() {
        return 0.0;
    }
    let n = top.len() as f64;
    let mean = top.iter().sum::<f64>() / n;
    (top.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / n).sqrt()
}

/// Positions sorted by descending score, ties broken by the lower item id.
pub fn rank_order(scores: &[f64], item_ids: &[u64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(item_ids[a].cmp(&item_ids[b])));
    order
}
