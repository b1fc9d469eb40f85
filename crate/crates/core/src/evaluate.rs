//! Retraining a linear head on (purified) labels and measuring accuracy.

use alloc::vec::Vec;
use core::cmp::Ordering;
use serde::{Deserialize, Serialize};

use crate::eac::{classifier_forward, classifier_step, AdamConfig, AdamState, LinearClassifier, StepOptions};
use crate::error::{invalid, Error, Result};
use crate::labels::{argmax, FeatureMatrix, HardLabels};
use crate::matrix::Matrix;
use crate::noise::label_accuracy;
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch: usize,
    pub optimizer: AdamConfig,
    pub seed: u64,
    pub weight_decay: f64,
    pub use_bias: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 100,
            batch: 256,
            optimizer: AdamConfig::default(),
            seed: 0,
            weight_decay: 0.0,
            use_bias: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch == 0 {
            return Err(invalid("epochs and batch size must be at least 1"));
        }
        if !(self.weight_decay >= 0.0) {
            return Err(invalid("weight decay must be non-negative"));
        }
        self.optimizer.validate()
    }
}

/// Minibatch Adam on hard-label cross entropy, starting from zero weights.
pub fn train_linear_ce(features: &FeatureMatrix, labels: &HardLabels, cfg: &TrainConfig) -> Result<LinearClassifier> {
    if labels.len() != features.rows() {
        return Err(Error::DimensionMismatch {
            op: "train_linear_ce",
            expected: (features.rows(), 1),
            found: (labels.len(), 1),
        });
    }
    train_linear_soft(features, &labels.one_hot(), cfg)
}

/// Same as [`train_linear_ce`] with probability-vector targets.
pub fn train_linear_soft(features: &FeatureMatrix, targets: &Matrix, cfg: &TrainConfig) -> Result<LinearClassifier> {
    cfg.validate()?;
    let (n, c) = targets.shape();
    if n != features.rows() {
        return Err(Error::DimensionMismatch {
            op: "train_linear_soft",
            expected: (features.rows(), c),
            found: targets.shape(),
        });
    }
    let mut clf = LinearClassifier::zeros(features.dim(), c);
    let mut state = AdamState::new(features.dim(), c);
    let mut rng = rng::stream(cfg.seed, rng::STREAM_TRAIN);
    let opts = StepOptions {
        entropy_weight: 0.0,
        weight_decay: cfg.weight_decay,
        update_bias: cfg.use_bias,
    };
    for epoch in 0..cfg.epochs {
        let order = rng::permutation(&mut rng, n);
        for idx in order.chunks(cfg.batch) {
            let f = features.matrix().select_rows(idx);
            let t = targets.select_rows(idx);
            classifier_step(&mut clf, &mut state, &cfg.optimizer, &f, &t, opts).map_err(|e| Error::AtIteration {
                epoch,
                iteration: state.steps() + 1,
                source: alloc::boxed::Box::new(e),
            })?;
        }
    }
    Ok(clf)
}

/// Argmax of the classifier logits, lowest index on ties.
pub fn predict(clf: &LinearClassifier, features: &FeatureMatrix) -> Result<HardLabels> {
    let logits = classifier_forward(clf, features.matrix())?;
    HardLabels::new(logits.iter_rows().map(argmax).collect(), clf.classes())
}

pub fn evaluate_classifier(clf: &LinearClassifier, features: &FeatureMatrix, labels: &HardLabels) -> Result<f64> {
    if labels.len() != features.rows() {
        return Err(Error::DimensionMismatch {
            op: "evaluate_classifier",
            expected: (features.rows(), 1),
            found: (labels.len(), 1),
        });
    }
    let pred = predict(clf, features)?;
    label_accuracy(
        &pred,
        &HardLabels::new(labels.as_slice().to_vec(), clf.classes().max(labels.classes()))?,
    )
}

/// Trains on a clean labeled subset and reports test accuracy.
///
/// Rows are put into a canonical order (by label, then by feature bits)
/// before training, so the result does not depend on how the subset was
/// ordered. A subset holding a single class yields the constant predictor
/// for that class.
pub fn linear_probe(
    train: &FeatureMatrix,
    labels: &HardLabels,
    test: &FeatureMatrix,
    test_labels: &HardLabels,
    cfg: &TrainConfig,
) -> Result<f64> {
    if labels.is_empty() {
        return Err(invalid("linear probe needs a non-empty labeled subset"));
    }
    if labels.len() != train.rows() {
        return Err(Error::DimensionMismatch {
            op: "linear_probe",
            expected: (train.rows(), 1),
            found: (labels.len(), 1),
        });
    }
    if test.dim() != train.dim() {
        return Err(Error::DimensionMismatch {
            op: "linear_probe (test)",
            expected: (test.rows(), train.dim()),
            found: (test.rows(), test.dim()),
        });
    }

    let c = labels.classes().max(test_labels.classes());
    let present: Vec<usize> = labels
        .counts()
        .iter()
        .enumerate()
        .filter(|(_, &k)| k > 0)
        .map(|(j, _)| j)
        .collect();
    if let [only] = present[..] {
        let mut clf = LinearClassifier::zeros(train.dim(), c);
        clf.bias[only] = 1.0;
        return evaluate_classifier(&clf, test, test_labels);
    }

    let mut order: Vec<usize> = (0..labels.len()).collect();
    order.sort_by(|&a, &b| {
        labels.as_slice()[a]
            .cmp(&labels.as_slice()[b])
            .then_with(|| cmp_rows(train.matrix().row(a), train.matrix().row(b)))
    });
    let f = train.select_rows(&order);
    let y = HardLabels::new(labels.select(&order).into_vec(), c)?;
    let clf = train_linear_ce(&f, &y, cfg)?;
    evaluate_classifier(&clf, test, test_labels)
}

fn cmp_rows(a: &[f64], b: &[f64]) -> Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(Ordering::Equal)
}
