//! Multinomial naive Bayes over raw term counts.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{check_examples, require_both_classes, sigmoid, ClassifierError, Example, TrainConfig};
use crate::textproc::SparseVector;

/// Log-space class priors and per-term likelihoods, indexed `[genuine, fraud]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NaiveBayesParams {
    pub alpha: f64,
    pub log_prior: [f64; 2],
    pub log_likelihood: [Vec<f64>; 2],
}

pub fn train_naive_bayes(
    train: &[Example],
    dim: usize,
    cfg: &TrainConfig,
) -> Result<NaiveBayesParams, ClassifierError> {
    cfg.validate()?;
    check_examples(train, dim)?;
    require_both_classes(train)?;

    let mut docs = [0usize; 2];
    let mut counts = [vec![0.0f64; dim], vec![0.0f64; dim]];
    for (x, y) in train {
        let c = *y as usize;
        docs[c] += 1;
        for &(i, n) in x.entries() {
            counts[c][i] += n;
        }
    }

    let n = train.len() as f64;
    let log_prior = [libm::log(docs[0] as f64 / n), libm::log(docs[1] as f64 / n)];
    let smoothed = |c: usize| -> Vec<f64> {
        let mass: f64 = counts[c].iter().sum();
        let denom = mass + cfg.alpha * dim as f64;
        counts[c]
            .iter()
            .map(|&k| libm::log((k + cfg.alpha) / denom))
            .collect()
    };
    Ok(NaiveBayesParams {
        alpha: cfg.alpha,
        log_prior,
        log_likelihood: [smoothed(0), smoothed(1)],
    })
}

impl NaiveBayesParams {
    /// Unnormalized log joint `log P(c) + sum_t n_t log P(t|c)` for both classes.
    pub fn joint_log_likelihood(&self, counts: &SparseVector) -> [f64; 2] {
        let mut jll = self.log_prior;
        for (c, ll) in self.log_likelihood.iter().enumerate() {
            jll[c] += counts
                .entries()
                .iter()
                .map(|&(i, n)| n * ll[i])
                .sum::<f64>();
        }
        jll
    }

    /// Posterior `[P(genuine|doc), P(fraud|doc)]`.
    pub fn posterior(&self, counts: &SparseVector) -> [f64; 2] {
        let fraud = self.score(counts);
        [1.0 - fraud, fraud]
    }

    /// Posterior probability of fraud.
    pub fn score(&self, counts: &SparseVector) -> f64 {
        let [g, f] = self.joint_log_likelihood(counts);
        sigmoid(f - g)
    }

    pub fn dim(&self) -> usize {
        self.log_likelihood[0].len()
    }
}
