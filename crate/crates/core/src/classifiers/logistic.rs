//! Binary logistic regression trained by full-batch gradient descent.
//!
//! Objective: mean cross-entropy plus `l2 / 2 * |w|^2`; the bias is not
//! regularized. Weights start at zero.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{check_examples, require_both_classes, sigmoid, ClassifierError, Example, TrainConfig};
use crate::textproc::SparseVector;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticParams {
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl LogisticParams {
    pub fn zeros(dim: usize) -> Self {
        LogisticParams {
            weights: vec![0.0; dim],
            bias: 0.0,
        }
    }

    pub fn score(&self, x: &SparseVector) -> f64 {
        sigmoid(x.dot(&self.weights) + self.bias)
    }
}

/// `log(1 + e^z)` without overflow.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + libm::log1p(libm::exp(-z))
    } else {
        libm::log1p(libm::exp(z))
    }
}

/// Regularized objective and its gradient (weights, bias) at `params`.
pub fn loss_and_gradient(
    params: &LogisticParams,
    batch: &[Example],
    l2: f64,
) -> (f64, Vec<f64>, f64) {
    let n = batch.len() as f64;
    let mut grad = vec![0.0; params.weights.len()];
    let mut grad_bias = 0.0;
    let mut loss = 0.0;
    for (x, y) in batch {
        let z = x.dot(&params.weights) + params.bias;
        let y = y.as_f64();
        loss += softplus(z) - y * z;
        let r = sigmoid(z) - y;
        for &(i, v) in x.entries() {
            grad[i] += r * v;
        }
        grad_bias += r;
    }
    let sq: f64 = params.weights.iter().map(|w| w * w).sum();
    loss = loss / n + 0.5 * l2 * sq;
    for (g, w) in grad.iter_mut().zip(&params.weights) {
        *g = *g / n + l2 * w;
    }
    (loss, grad, grad_bias / n)
}

/// Trained parameters plus the objective value before each epoch's update
/// and after the last one.
#[derive(Debug, Clone, PartialEq)]
pub struct LogisticFit {
    pub params: LogisticParams,
    pub losses: Vec<f64>,
}

pub fn train_logistic_regression(
    train: &[Example],
    dim: usize,
    cfg: &TrainConfig,
) -> Result<LogisticFit, ClassifierError> {
    cfg.validate()?;
    check_examples(train, dim)?;
    require_both_classes(train)?;

    let mut params = LogisticParams::zeros(dim);
    let mut losses = Vec::with_capacity(cfg.epochs + 1);
    for epoch in 0..=cfg.epochs {
        let (loss, grad, grad_bias) = loss_and_gradient(&params, train, cfg.l2);
        if !loss.is_finite() {
            return Err(ClassifierError::NonFiniteLoss { epoch });
        }
        if let Some(&prev) = losses.last() {
            // gradient descent with a safe step never increases the objective
            if loss > prev + 1e-12 * libm::fabs(prev).max(1.0) {
                return Err(ClassifierError::NonFiniteLoss { epoch });
            }
        }
        losses.push(loss);
        if epoch == cfg.epochs {
            break;
        }
        for (w, g) in params.weights.iter_mut().zip(&grad) {
            *w -= cfg.learning_rate * g;
        }
        params.bias -= cfg.learning_rate * grad_bias;
    }
    Ok(LogisticFit { params, losses })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::BinaryLabel::{Fraud, Genuine};

    fn one_feature() -> Vec<Example> {
        (0..10)
            .map(|i| {
                if i % 2 == 0 {
                    (SparseVector::from_entries(vec![(0, 1.0)]), Fraud)
                } else {
                    (SparseVector::from_entries(vec![(0, -1.0)]), Genuine)
                }
            })
            .collect()
    }

    #[test]
    fn zero_model_scores_half() {
        let p = LogisticParams::zeros(3);
        assert_eq!(p.score(&SparseVector::from_entries(vec![(1, 0.7)])), 0.5);
    }

    #[test]
    fn first_steps_push_weight_positive() {
        // by hand: at w=0 every residual is +-0.5, so dL/dw = -0.5 and
        // one step of lr 0.1 gives w = 0.05 > 0.
        let cfg = TrainConfig {
            epochs: 1,
            l2: 0.0,
            ..TrainConfig::default()
        };
        let fit = train_logistic_regression(&one_feature(), 1, &cfg).unwrap();
        assert!((fit.params.weights[0] - 0.05).abs() < 1e-15);
        assert_eq!(fit.params.bias, 0.0);
    }

    #[test]
    fn separable_case_reaches_full_accuracy() {
        let data = one_feature();
        let fit = train_logistic_regression(&data, 1, &TrainConfig::default()).unwrap();
        assert!(fit.params.weights[0] > 0.0);
        let correct = data
            .iter()
            .filter(|(x, y)| (fit.params.score(x) > 0.5) == y.is_fraud())
            .count();
        assert_eq!(correct, data.len());
        assert!(fit.losses.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn single_class_rejected() {
        let data: Vec<Example> = one_feature().into_iter().filter(|e| e.1 == Fraud).collect();
        assert_eq!(
            train_logistic_regression(&data, 1, &TrainConfig::default()).unwrap_err(),
            ClassifierError::SingleClassInput
        );
    }

    #[test]
    fn divergence_is_reported() {
        let data = vec![
            (SparseVector::from_entries(vec![(0, 1e3)]), Fraud),
            (SparseVector::from_entries(vec![(0, -1e3)]), Fraud),
            (SparseVector::from_entries(vec![(0, 1e3)]), Genuine),
        ];
        let cfg = TrainConfig {
            learning_rate: 50.0,
            ..TrainConfig::default()
        };
        assert!(matches!(
            train_logistic_regression(&data, 1, &cfg),
            Err(ClassifierError::NonFiniteLoss { .. })
        ));
    }
}
