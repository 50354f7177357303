//! Random forest of CART trees.
//!
//! Tree `i` draws its bootstrap sample and per-split feature subsets from a
//! generator seeded with `seed + i`, so trees can be trained in any order (or
//! in parallel) and the forest comes out the same.

use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::tree::{Grower, TreeParams};
use super::{check_examples, ClassifierError, Example, FeatureSubsample, TrainConfig};
use crate::textproc::SparseVector;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub trees: Vec<TreeParams>,
}

impl ForestParams {
    /// Mean of the trees' leaf scores.
    pub fn score(&self, x: &SparseVector) -> f64 {
        let sum: f64 = self.trees.iter().map(|t| t.score(x)).sum();
        sum / self.trees.len() as f64
    }
}

fn train_tree(train: &[Example], dim: usize, cfg: &TrainConfig, index: usize) -> TreeParams {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(index as u64));
    let n = train.len();
    let samples: Vec<usize> = if cfg.bootstrap {
        (0..n).map(|_| rng.gen_range(0..n)).collect()
    } else {
        (0..n).collect()
    };
    let mut grower = Grower::new(train, cfg.max_depth, cfg.min_leaf);
    if cfg.feature_subsample != FeatureSubsample::All {
        grower.subsample = Some(cfg.feature_subsample.count(dim));
        grower.rng = Some(rng);
    }
    grower.grow(samples)
}

pub fn train_random_forest(
    train: &[Example],
    dim: usize,
    cfg: &TrainConfig,
) -> Result<ForestParams, ClassifierError> {
    cfg.validate()?;
    check_examples(train, dim)?;

    #[cfg(feature = "parallel")]
    let trees = {
        use rayon::prelude::*;
        (0..cfg.n_trees)
            .into_par_iter()
            .map(|i| train_tree(train, dim, cfg, i))
            .collect()
    };
    #[cfg(not(feature = "parallel"))]
    let trees = (0..cfg.n_trees)
        .map(|i| train_tree(train, dim, cfg, i))
        .collect();

    Ok(ForestParams { trees })
}
