//! CART decision tree with Gini impurity.
//!
//! Thresholds are midpoints between consecutive distinct feature values and an
//! example goes left when `x[feature] <= threshold`. Among equally good splits
//! the lower feature index wins, then the lower threshold.

use alloc::vec::Vec;
use core::cmp::Ordering;

use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{check_examples, ClassifierError, Example, TrainConfig};
use crate::textproc::SparseVector;

/// Smallest impurity decrease that counts as a split.
const MIN_GAIN: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "snake_case")]
pub enum TreeNode {
    Leaf {
        score: f64,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

/// Flat node array; the root is node 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeParams {
    pub nodes: Vec<TreeNode>,
}

impl TreeParams {
    pub fn score(&self, x: &SparseVector) -> f64 {
        let mut at = 0;
        loop {
            match self.nodes[at] {
                TreeNode::Leaf { score } => return score,
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    at = if x.get(feature) <= threshold {
                        left
                    } else {
                        right
                    };
                }
            }
        }
    }

    pub fn root(&self) -> &TreeNode {
        &self.nodes[0]
    }

    pub fn leaf_count(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, TreeNode::Leaf { .. }))
            .count()
    }

    pub(crate) fn validate(&self, dim: usize) -> bool {
        let n = self.nodes.len();
        n > 0
            && self.nodes.iter().enumerate().all(|(i, node)| match *node {
                TreeNode::Leaf { score } => (0.0..=1.0).contains(&score),
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    feature < dim
                        && threshold.is_finite()
                        && left > i
                        && right > i
                        && left < n
                        && right < n
                }
            })
    }
}

/// Gini impurity of a node with `fraud` positives out of `n`.
pub fn gini(fraud: usize, n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let p = fraud as f64 / n as f64;
    1.0 - p * p - (1.0 - p) * (1.0 - p)
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    gain: f64,
    feature: usize,
    threshold: f64,
}

impl Candidate {
    fn beats(&self, other: &Candidate) -> bool {
        match self.gain.partial_cmp(&other.gain) {
            Some(Ordering::Greater) => true,
            Some(Ordering::Equal) => {
                (self.feature, self.threshold) < (other.feature, other.threshold)
            }
            _ => false,
        }
    }
}

pub(crate) struct Grower<'a> {
    pub data: &'a [Example],
    pub max_depth: usize,
    pub min_leaf: usize,
    /// Features inspected per split; `None` inspects all.
    pub subsample: Option<usize>,
    pub rng: Option<ChaCha8Rng>,
    nodes: Vec<TreeNode>,
}

impl<'a> Grower<'a> {
    pub fn new(data: &'a [Example], max_depth: usize, min_leaf: usize) -> Self {
        Grower {
            data,
            max_depth,
            min_leaf,
            subsample: None,
            rng: None,
            nodes: Vec::new(),
        }
    }

    pub fn grow(mut self, samples: Vec<usize>) -> TreeParams {
        self.grow_node(samples, 0);
        TreeParams { nodes: self.nodes }
    }

    fn grow_node(&mut self, samples: Vec<usize>, depth: usize) -> usize {
        let at = self.nodes.len();
        let n = samples.len();
        let fraud = samples
            .iter()
            .filter(|&&s| self.data[s].1.is_fraud())
            .count();
        self.nodes.push(TreeNode::Leaf {
            score: fraud as f64 / n as f64,
        });

        if fraud == 0 || fraud == n || depth >= self.max_depth || n < 2 * self.min_leaf {
            return at;
        }
        let Some(best) = self.best_split(&samples, fraud) else {
            return at;
        };
        let (left, right): (Vec<usize>, Vec<usize>) = samples
            .into_iter()
            .partition(|&s| self.data[s].0.get(best.feature) <= best.threshold);
        let left = self.grow_node(left, depth + 1);
        let right = self.grow_node(right, depth + 1);
        self.nodes[at] = TreeNode::Split {
            feature: best.feature,
            threshold: best.threshold,
            left,
            right,
        };
        at
    }

    fn best_split(&mut self, samples: &[usize], fraud: usize) -> Option<Candidate> {
        // features that are zero on every sample are constant here
        let mut features: Vec<usize> = samples
            .iter()
            .flat_map(|&s| self.data[s].0.entries().iter().map(|e| e.0))
            .collect();
        features.sort_unstable();
        features.dedup();

        let budget = match (self.subsample, self.rng.as_mut()) {
            (Some(k), Some(rng)) => {
                features.shuffle(rng);
                k
            }
            _ => usize::MAX,
        };

        let parent = gini(fraud, samples.len());
        let mut best: Option<Candidate> = None;
        let mut inspected = 0;
        let mut column: Vec<(f64, bool)> = Vec::with_capacity(samples.len());
        for &feature in &features {
            if inspected >= budget {
                break;
            }
            column.clear();
            column.extend(
                samples
                    .iter()
                    .map(|&s| (self.data[s].0.get(feature), self.data[s].1.is_fraud())),
            );
            column.sort_by(|a, b| a.0.total_cmp(&b.0));
            if column[0].0 == column[column.len() - 1].0 {
                continue;
            }
            inspected += 1;
            if let Some(c) = self.scan(&column, feature, parent, fraud) {
                if best.as_ref().is_none_or(|b| c.beats(b)) {
                    best = Some(c);
                }
            }
        }
        best
    }

    fn scan(
        &self,
        column: &[(f64, bool)],
        feature: usize,
        parent: f64,
        fraud: usize,
    ) -> Option<Candidate> {
        let n = column.len();
        let mut best: Option<Candidate> = None;
        let mut left_fraud = 0;
        for i in 0..n - 1 {
            if column[i].1 {
                left_fraud += 1;
            }
            let (lo, hi) = (column[i].0, column[i + 1].0);
            let nl = i + 1;
            let nr = n - nl;
            if lo == hi || nl < self.min_leaf || nr < self.min_leaf {
                continue;
            }
            let weighted = (nl as f64 * gini(left_fraud, nl)
                + nr as f64 * gini(fraud - left_fraud, nr))
                / n as f64;
            let c = Candidate {
                gain: parent - weighted,
                feature,
                threshold: lo + (hi - lo) / 2.0,
            };
            if c.gain > MIN_GAIN && best.as_ref().is_none_or(|b| c.beats(b)) {
                best = Some(c);
            }
        }
        best
    }
}

pub fn train_decision_tree(
    train: &[Example],
    dim: usize,
    cfg: &TrainConfig,
) -> Result<TreeParams, ClassifierError> {
    cfg.validate()?;
    check_examples(train, dim)?;
    let grower = Grower::new(train, cfg.max_depth, cfg.min_leaf);
    Ok(grower.grow((0..train.len()).collect()))
}
