use serde::{Deserialize, Serialize};

use super::{ConfusionMatrix, MetricSet};

/// Best integer matrix for a published metric row.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Reconstruction {
    pub matrix: ConfusionMatrix,
    /// Largest absolute difference over accuracy, precision and recall.
    pub deviation: f64,
}

fn deviation(m: &ConfusionMatrix, target: &MetricSet) -> f64 {
    let mut d =
        libm::fabs(m.precision() - target.precision).max(libm::fabs(m.recall() - target.recall));
    if let Some(acc) = target.accuracy {
        d = d.max(libm::fabs(m.accuracy() - acc));
    }
    d
}

/// Exhaustive search over `tp in 0..=n_pos`, `fp in 0..=n_neg` for the matrix
/// closest to `target` in max-abs deviation. Accuracy is ignored when the
/// target has none. Ties go to the smallest `tp`, then the smallest `fp`.
pub fn reconstruct_confusion(target: &MetricSet, n_pos: u64, n_neg: u64) -> Reconstruction {
    let mut best = Reconstruction {
        matrix: ConfusionMatrix::new(0, 0, n_pos, n_neg),
        deviation: f64::INFINITY,
    };
    for tp in 0..=n_pos {
        for fp in 0..=n_neg {
            let m = ConfusionMatrix::new(tp, fp, n_pos - tp, n_neg - fp);
            let d = deviation(&m, target);
            if d < best.deviation {
                best = Reconstruction {
                    matrix: m,
                    deviation: d,
                };
            }
        }
    }
    best
}
