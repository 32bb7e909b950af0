//! Normalized rankings: the highest score gets 1, the lowest 1/N.

use std::cmp::Ordering;

/// Returns, for each position, its normalized rank `k/N` where `k` counts
/// from the bottom. Scores are sorted descending; equal scores are ordered by
/// ascending id, so the lexicographically smaller id ranks higher.
pub fn normalized_ranks(ids: &[String], scores: &[f64]) -> Vec<f64> {
    assert_eq!(ids.len(), scores.len(), "ids and scores must align");
    ranks_from_order(&descending_order(ids, scores))
}

/// `order[0]` is the best element. Returns per-index ranks in `{1/N, .., 1}`.
pub fn ranks_from_order(order: &[usize]) -> Vec<f64> {
    let n = order.len();
    let mut ranks = vec![0.0; n];
    for (pos, &i) in order.iter().enumerate() {
        ranks[i] = (n - pos) as f64 / n as f64;
    }
    ranks
}

/// Indices sorted by descending score, ties by ascending id.
pub fn descending_order(ids: &[String], scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..ids.len()).collect();
    order.sort_by(|&a, &b| {
        scores[b]
            .partial_cmp(&scores[a])
            .unwrap_or(Ordering::Equal)
            .then_with(|| ids[a].cmp(&ids[b]))
    });
    order
}
