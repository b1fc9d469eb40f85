//! Feature matrices, label representations and the conversions between
//! logits, soft labels and hard labels.

use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::matrix::Matrix;

/// Frozen embeddings, one row per sample. Every entry is finite and the
/// matrix has at least one row and one column.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix(Matrix);

impl FeatureMatrix {
    pub fn new(m: Matrix) -> Result<Self> {
        if m.rows() == 0 || m.cols() == 0 {
            return Err(invalid("feature matrix needs at least one row and one column"));
        }
        m.ensure_finite("features")?;
        Ok(FeatureMatrix(m))
    }

    pub fn rows(&self) -> usize {
        self.0.rows()
    }

    pub fn dim(&self) -> usize {
        self.0.cols()
    }

    pub fn matrix(&self) -> &Matrix {
        &self.0
    }

    pub fn into_matrix(self) -> Matrix {
        self.0
    }

    pub fn select_rows(&self, idx: &[usize]) -> FeatureMatrix {
        FeatureMatrix(self.0.select_rows(idx))
    }

    /// Scales every row to unit Euclidean norm. All-zero rows are kept as is.
    pub fn l2_normalized(&self) -> FeatureMatrix {
        let mut m = self.0.clone();
        for i in 0..m.rows() {
            let row = m.row_mut(i);
            let norm = libm::sqrt(row.iter().map(|v| v * v).sum());
            if norm > 0.0 {
                row.iter_mut().for_each(|v| *v /= norm);
            }
        }
        FeatureMatrix(m)
    }

    /// Appends a constant-1 column.
    pub fn with_bias_column(&self) -> FeatureMatrix {
        FeatureMatrix(self.0.with_constant_column(1.0))
    }
}

/// Class indices in `[0, classes)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HardLabels {
    values: Vec<usize>,
    classes: usize,
}

impl HardLabels {
    pub fn new(values: Vec<usize>, classes: usize) -> Result<Self> {
        if classes == 0 {
            return Err(invalid("number of classes must be positive"));
        }
        if let Some((index, &label)) = values.iter().enumerate().find(|(_, &l)| l >= classes) {
            return Err(Error::LabelOutOfRange { index, label, classes });
        }
        Ok(HardLabels { values, classes })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.values
    }

    pub fn into_vec(self) -> Vec<usize> {
        self.values
    }

    pub fn select(&self, idx: &[usize]) -> HardLabels {
        HardLabels {
            values: idx.iter().map(|&i| self.values[i]).collect(),
            classes: self.classes,
        }
    }

    pub fn one_hot(&self) -> Matrix {
        let mut m = Matrix::zeros(self.values.len(), self.classes);
        for (i, &l) in self.values.iter().enumerate() {
            m.set(i, l, 1.0);
        }
        m
    }

    /// Number of samples per class.
    pub fn counts(&self) -> Vec<usize> {
        let mut counts = alloc::vec![0; self.classes];
        for &l in &self.values {
            counts[l] += 1;
        }
        counts
    }
}

/// The optimization variable of purification: an `N×c` matrix of
/// unconstrained label logits. Soft labels are `softmax(α·row)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelLogits(Matrix);

impl LabelLogits {
    pub fn new(m: Matrix) -> Result<Self> {
        if m.cols() == 0 {
            return Err(invalid("label logits need at least one class"));
        }
        m.ensure_finite("label logits")?;
        Ok(LabelLogits(m))
    }

    pub fn rows(&self) -> usize {
        self.0.rows()
    }

    pub fn classes(&self) -> usize {
        self.0.cols()
    }

    pub fn matrix(&self) -> &Matrix {
        &self.0
    }

    pub(crate) fn matrix_mut(&mut self) -> &mut Matrix {
        &mut self.0
    }

    pub fn into_matrix(self) -> Matrix {
        self.0
    }

    pub fn select_rows(&self, idx: &[usize]) -> Matrix {
        self.0.select_rows(idx)
    }

    /// Row-wise `softmax(α·Y)`.
    pub fn effective_labels(&self, alpha: f64) -> Matrix {
        softmax_rows(&self.0, alpha)
    }

    /// Row-wise argmax; ties go to the lowest class index.
    pub fn hard_labels(&self) -> HardLabels {
        HardLabels {
            values: self.0.iter_rows().map(argmax).collect(),
            classes: self.classes(),
        }
    }
}

/// One-hot logits: row `i` has 1 at `labels[i]` and 0 elsewhere.
pub fn init_logits(labels: &HardLabels) -> LabelLogits {
    init_logits_scaled(labels, 1.0)
}

/// One-hot logits multiplied by `scale`, for sharper initial soft labels.
pub fn init_logits_scaled(labels: &HardLabels, scale: f64) -> LabelLogits {
    let mut m = labels.one_hot();
    if scale != 1.0 {
        m.scale(scale);
    }
    LabelLogits(m)
}

/// Index of the largest entry, lowest index on ties. NaN entries never win.
pub fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    let mut best_v = f64::NEG_INFINITY;
    for (j, &v) in row.iter().enumerate() {
        if v > best_v {
            best = j;
            best_v = v;
        }
    }
    best
}

/// Writes `softmax(scale·input)` into `out` using max subtraction.
pub fn softmax_into(input: &[f64], scale: f64, out: &mut [f64]) {
    debug_assert_eq!(input.len(), out.len());
    let max = input.iter().map(|&v| scale * v).fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for (o, &v) in out.iter_mut().zip(input) {
        *o = libm::exp(scale * v - max);
        sum += *o;
    }
    out.iter_mut().for_each(|o| *o /= sum);
}

/// Writes `log softmax(input)` into `out`.
pub fn log_softmax_into(input: &[f64], out: &mut [f64]) {
    let max = input.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = input.iter().map(|&v| libm::exp(v - max)).sum();
    let lse = max + libm::log(sum);
    for (o, &v) in out.iter_mut().zip(input) {
        *o = v - lse;
    }
}

pub fn softmax_rows(m: &Matrix, scale: f64) -> Matrix {
    let mut out = Matrix::zeros(m.rows(), m.cols());
    for i in 0..m.rows() {
        softmax_into(m.row(i), scale, out.row_mut(i));
    }
    out
}

/// Shannon entropy (nats) of `softmax(logits)`, computed from log-probabilities.
pub fn softmax_entropy(logits: &[f64]) -> f64 {
    let mut logp = alloc::vec![0.0; logits.len()];
    log_softmax_into(logits, &mut logp);
    -logp.iter().map(|&lp| libm::exp(lp) * lp).sum::<f64>()
}

/// Paired clean features and one-hot labels used to guide purification.
#[derive(Debug, Clone, PartialEq)]
pub struct CleanValidationSet {
    features: FeatureMatrix,
    labels: Matrix,
}

impl CleanValidationSet {
    /// `labels` must be one-hot: exactly one entry equal to 1 per row, the
    /// rest 0.
    pub fn new(features: FeatureMatrix, labels: Matrix) -> Result<Self> {
        if labels.rows() != features.rows() {
            return Err(Error::DimensionMismatch {
                op: "validation set",
                expected: (features.rows(), labels.cols()),
                found: labels.shape(),
            });
        }
        if labels.cols() == 0 {
            return Err(invalid("validation labels need at least one class"));
        }
        for (i, row) in labels.iter_rows().enumerate() {
            let ones = row.iter().filter(|&&v| v == 1.0).count();
            let zeros = row.iter().filter(|&&v| v == 0.0).count();
            if ones != 1 || ones + zeros != row.len() {
                return Err(invalid(alloc::format!("validation label row {i} is not one-hot")));
            }
        }
        Ok(CleanValidationSet { features, labels })
    }

    pub fn from_hard(features: FeatureMatrix, labels: &HardLabels) -> Result<Self> {
        Self::new(features, labels.one_hot())
    }

    pub fn features(&self) -> &FeatureMatrix {
        &self.features
    }

    pub fn labels(&self) -> &Matrix {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.features.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn classes(&self) -> usize {
        self.labels.cols()
    }

    pub fn hard_labels(&self) -> HardLabels {
        HardLabels {
            values: self.labels.iter_rows().map(argmax).collect(),
            classes: self.classes(),
        }
    }

    pub fn select(&self, idx: &[usize]) -> CleanValidationSet {
        CleanValidationSet {
            features: self.features.select_rows(idx),
            labels: self.labels.select_rows(idx),
        }
    }

    pub(crate) fn map_features(&self, f: impl Fn(&FeatureMatrix) -> FeatureMatrix) -> Self {
        CleanValidationSet {
            features: f(&self.features),
            labels: self.labels.clone(),
        }
    }
}
