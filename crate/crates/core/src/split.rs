//! Deterministic train/validation/test splitting.
//!
//! Part sizes use floor/floor/remainder: `|train| = floor(f_train * n)`,
//! `|val| = floor(f_val * n)`, and the test part takes what is left. With
//! stratification each class is apportioned across the parts by largest
//! remainder, so every part's fraud count is within one item of its exact share.

use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{BinaryLabel, LabeledComment};

/// Guards `floor` against products like `0.29 * 100 = 28.999999999999996`.
const FLOOR_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub val_fraction: f64,
    pub test_fraction: f64,
    pub seed: u64,
    pub stratified: bool,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            train_fraction: 0.8,
            val_fraction: 0.1,
            test_fraction: 0.1,
            seed: 42,
            stratified: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SplitError {
    #[error("cannot split an empty dataset")]
    EmptyInput,
    #[error("split fractions must each lie in (0,1) and sum to 1")]
    InvalidFractions,
    #[error("split of {n} items leaves the {part} part empty")]
    DegenerateSplit { n: usize, part: &'static str },
}

impl SplitSpec {
    pub fn new(train: f64, val: f64, test: f64) -> Result<Self, SplitError> {
        let spec = SplitSpec {
            train_fraction: train,
            val_fraction: val,
            test_fraction: test,
            ..SplitSpec::default()
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_stratified(mut self, stratified: bool) -> Self {
        self.stratified = stratified;
        self
    }

    pub fn validate(&self) -> Result<(), SplitError> {
        let fractions = [self.train_fraction, self.val_fraction, self.test_fraction];
        let in_range = fractions
            .iter()
            .all(|f| f.is_finite() && *f > 0.0 && *f < 1.0);
        let sum: f64 = fractions.iter().sum();
        if !in_range || (sum - 1.0).abs() > 1e-9 {
            return Err(SplitError::InvalidFractions);
        }
        Ok(())
    }

    /// Part sizes for `n` items under the floor/floor/remainder rule.
    pub fn sizes(&self, n: usize) -> Result<[usize; 3], SplitError> {
        self.validate()?;
        let train = floor_share(self.train_fraction, n);
        let val = floor_share(self.val_fraction, n);
        let test = n
            .checked_sub(train + val)
            .ok_or(SplitError::InvalidFractions)?;
        let sizes = [train, val, test];
        for (size, part) in sizes.iter().zip(PART_NAMES) {
            if *size == 0 {
                return Err(SplitError::DegenerateSplit { n, part });
            }
        }
        Ok(sizes)
    }
}

const PART_NAMES: [&str; 3] = ["train", "validation", "test"];

fn floor_share(fraction: f64, n: usize) -> usize {
    libm::floor(fraction * n as f64 + FLOOR_SLACK) as usize
}

/// Which split part an item was assigned to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitPart {
    Train,
    Validation,
    Test,
}

/// Indices into the input, per part, each in ascending input order.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SplitIndices {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

impl SplitIndices {
    pub fn part(&self, part: SplitPart) -> &[usize] {
        match part {
            SplitPart::Train => &self.train,
            SplitPart::Validation => &self.val,
            SplitPart::Test => &self.test,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Split<T> {
    pub train: Vec<T>,
    pub val: Vec<T>,
    pub test: Vec<T>,
}

/// Assigns every label position to a part.
pub fn split_indices(labels: &[BinaryLabel], spec: &SplitSpec) -> Result<SplitIndices, SplitError> {
    let n = labels.len();
    if n == 0 {
        return Err(SplitError::EmptyInput);
    }
    let sizes = spec.sizes(n)?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut out = SplitIndices::default();

    if spec.stratified {
        let fraud: Vec<usize> = (0..n).filter(|&i| labels[i].is_fraud()).collect();
        let genuine: Vec<usize> = (0..n).filter(|&i| !labels[i].is_fraud()).collect();
        let fraud_counts = apportion(fraud.len(), &sizes, n);
        let genuine_counts = [
            sizes[0] - fraud_counts[0],
            sizes[1] - fraud_counts[1],
            sizes[2] - fraud_counts[2],
        ];
        deal(fraud, &fraud_counts, &mut rng, &mut out);
        deal(genuine, &genuine_counts, &mut rng, &mut out);
    } else {
        deal((0..n).collect(), &sizes, &mut rng, &mut out);
    }

    out.train.sort_unstable();
    out.val.sort_unstable();
    out.test.sort_unstable();
    Ok(out)
}

/// Largest-remainder apportionment of `class_n` items across parts in
/// proportion to `sizes`; ties go to the earlier part.
fn apportion(class_n: usize, sizes: &[usize; 3], n: usize) -> [usize; 3] {
    let mut counts = [0usize; 3];
    let mut remainders = [(0usize, 0usize); 3];
    for (p, &size) in sizes.iter().enumerate() {
        // exact integer arithmetic: class_n * size / n
        let num = class_n * size;
        counts[p] = num / n;
        remainders[p] = (num % n, p);
    }
    let mut left = class_n - counts.iter().sum::<usize>();
    remainders.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
    for &(_, p) in remainders.iter() {
        if left == 0 {
            break;
        }
        counts[p] += 1;
        left -= 1;
    }
    counts
}

fn deal(mut pool: Vec<usize>, counts: &[usize; 3], rng: &mut ChaCha8Rng, out: &mut SplitIndices) {
    pool.shuffle(rng);
    let (train, rest) = pool.split_at(counts[0]);
    let (val, test) = rest.split_at(counts[1]);
    debug_assert_eq!(test.len(), counts[2]);
    out.train.extend_from_slice(train);
    out.val.extend_from_slice(val);
    out.test.extend_from_slice(test);
}

/// Splits labeled comments into disjoint train/validation/test parts.
pub fn split_dataset(
    items: &[LabeledComment],
    spec: &SplitSpec,
) -> Result<Split<LabeledComment>, SplitError> {
    let labels: Vec<BinaryLabel> = items.iter().map(LabeledComment::binary).collect();
    let idx = split_indices(&labels, spec)?;
    let pick = |ix: &[usize]| ix.iter().map(|&i| items[i].clone()).collect::<Vec<_>>();
    Ok(Split {
        train: pick(&idx.train),
        val: pick(&idx.val),
        test: pick(&idx.test),
    })
}
