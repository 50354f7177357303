use alloc::vec::Vec;

use super::MetricsError;
use crate::corpus::BinaryLabel;

/// Probability that a random fraud item outscores a random genuine one, ties
/// counting one half (Mann-Whitney U over average ranks).
pub fn roc_auc(scores: &[f64], gold: &[BinaryLabel]) -> Result<f64, MetricsError> {
    if scores.len() != gold.len() {
        return Err(MetricsError::LengthMismatch {
            pred: scores.len(),
            gold: gold.len(),
        });
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(MetricsError::InvalidScore);
    }
    let n_pos = gold.iter().filter(|g| g.is_fraud()).count();
    let n_neg = gold.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(MetricsError::SingleClassInput);
    }

    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));

    // sum of 1-based average ranks of the positives
    let mut pos_rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let avg_rank = (i + j) as f64 / 2.0 + 1.0;
        let positives = order[i..=j].iter().filter(|&&k| gold[k].is_fraud()).count();
        pos_rank_sum += avg_rank * positives as f64;
        i = j + 1;
    }
    let (p, n) = (n_pos as f64, n_neg as f64);
    Ok((pos_rank_sum - p * (p + 1.0) / 2.0) / (p * n))
}
