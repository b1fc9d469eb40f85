//! Extrinsic auxiliary correction: a linear classifier trained on the soft
//! labels produced by IPC, whose logits periodically replace (or blend into)
//! the label logits.

use alloc::vec;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::labels::{log_softmax_into, softmax_rows};
use crate::matrix::Matrix;

/// `x ↦ Wᵀx + b`
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearClassifier {
    pub weights: Matrix,
    pub bias: Vec<f64>,
}

impl LinearClassifier {
    pub fn zeros(dim: usize, classes: usize) -> Self {
        LinearClassifier {
            weights: Matrix::zeros(dim, classes),
            bias: vec![0.0; classes],
        }
    }

    pub fn new(weights: Matrix, bias: Vec<f64>) -> Result<Self> {
        if bias.len() != weights.cols() {
            return Err(Error::DimensionMismatch {
                op: "classifier",
                expected: (1, weights.cols()),
                found: (1, bias.len()),
            });
        }
        weights.ensure_finite("classifier weights")?;
        if let Some(index) = bias.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                what: "classifier bias",
                index,
            });
        }
        Ok(LinearClassifier { weights, bias })
    }

    pub fn dim(&self) -> usize {
        self.weights.rows()
    }

    pub fn classes(&self) -> usize {
        self.weights.cols()
    }
}

/// Adaptive-moment optimizer settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl AdamConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return Err(invalid("optimizer step size must be non-negative"));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(invalid("moment decays must lie in [0, 1)"));
        }
        if !(self.eps > 0.0) {
            return Err(invalid("optimizer epsilon must be positive"));
        }
        Ok(())
    }
}

/// First and second moment estimates for a [`LinearClassifier`].
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    m_w: Matrix,
    v_w: Matrix,
    m_b: Vec<f64>,
    v_b: Vec<f64>,
    t: u64,
}

impl AdamState {
    pub fn new(dim: usize, classes: usize) -> Self {
        AdamState {
            m_w: Matrix::zeros(dim, classes),
            v_w: Matrix::zeros(dim, classes),
            m_b: vec![0.0; classes],
            v_b: vec![0.0; classes],
            t: 0,
        }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }
}

fn adam_update(cfg: &AdamConfig, t: u64, params: &mut [f64], grads: &[f64], m: &mut [f64], v: &mut [f64]) {
    let bc1 = 1.0 - libm::pow(cfg.beta1, t as f64);
    let bc2 = 1.0 - libm::pow(cfg.beta2, t as f64);
    for i in 0..params.len() {
        let g = grads[i];
        m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g;
        v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g * g;
        let m_hat = m[i] / bc1;
        let v_hat = v[i] / bc2;
        params[i] -= cfg.lr * m_hat / (libm::sqrt(v_hat) + cfg.eps);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BlendSpace {
    /// `(1−η)·Y + η·logits`
    Logit,
    /// `log((1−η)·softmax(αY) + η·softmax(logits)) / α`
    Probability,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EacConfig {
    /// Momentum of the periodic label update.
    pub eta: f64,
    /// Label update period in iterations.
    pub period: u64,
    pub entropy_weight: f64,
    pub optimizer: AdamConfig,
    pub seed: u64,
    pub use_bias: bool,
    /// Train on argmax labels instead of `softmax(αY)`.
    pub hard_targets: bool,
    pub blend_space: BlendSpace,
    /// Classifier optimizer steps per IPC step.
    pub steps_per_iter: usize,
}

impl Default for EacConfig {
    fn default() -> Self {
        EacConfig {
            eta: 1.0,
            period: 50,
            entropy_weight: 1.0,
            optimizer: AdamConfig::default(),
            seed: 0,
            use_bias: true,
            hard_targets: false,
            blend_space: BlendSpace::Logit,
            steps_per_iter: 1,
        }
    }
}

impl EacConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.eta) {
            return Err(invalid("eta_e must lie in [0, 1]"));
        }
        if self.period == 0 {
            return Err(invalid("update period must be at least 1"));
        }
        if !(self.entropy_weight >= 0.0 && self.entropy_weight.is_finite()) {
            return Err(invalid("entropy weight must be non-negative"));
        }
        self.optimizer.validate()
    }
}

pub fn classifier_forward(clf: &LinearClassifier, features: &Matrix) -> Result<Matrix> {
    if features.cols() != clf.dim() {
        return Err(Error::DimensionMismatch {
            op: "classifier_forward",
            expected: (features.rows(), clf.dim()),
            found: features.shape(),
        });
    }
    let mut out = features.matmul(&clf.weights)?;
    for i in 0..out.rows() {
        for (o, b) in out.row_mut(i).iter_mut().zip(&clf.bias) {
            *o += b;
        }
    }
    Ok(out)
}

fn check_targets(logits: &Matrix, targets: &Matrix) -> Result<()> {
    targets.ensure_shape("eac_loss", logits.rows(), logits.cols())?;
    if logits.rows() == 0 {
        return Err(invalid("loss over zero rows"));
    }
    for (i, row) in targets.iter_rows().enumerate() {
        let sum: f64 = row.iter().sum();
        if (sum - 1.0).abs() > 1e-6 || row.iter().any(|&v| !(v >= 0.0)) {
            return Err(invalid(alloc::format!("target row {i} is not a probability vector")));
        }
    }
    Ok(())
}

/// Mean over rows of `CE(softmax(z), t) + γ·H(softmax(z))`.
pub fn eac_loss(logits: &Matrix, targets: &Matrix, entropy_weight: f64) -> Result<f64> {
    Ok(eac_loss_and_grad(logits, targets, entropy_weight)?.0)
}

/// Loss and its gradient with respect to the logits.
pub fn eac_loss_and_grad(logits: &Matrix, targets: &Matrix, entropy_weight: f64) -> Result<(f64, Matrix)> {
    check_targets(logits, targets)?;
    let (n, c) = logits.shape();
    let inv_n = 1.0 / n as f64;
    let mut grad = Matrix::zeros(n, c);
    let mut logq = vec![0.0; c];
    let mut total = 0.0;
    for i in 0..n {
        log_softmax_into(logits.row(i), &mut logq);
        let t = targets.row(i);
        let ce: f64 = -t.iter().zip(&logq).map(|(a, b)| a * b).sum::<f64>();
        let h: f64 = -logq.iter().map(|&l| libm::exp(l) * l).sum::<f64>();
        total += ce + entropy_weight * h;
        for (k, g) in grad.row_mut(i).iter_mut().enumerate() {
            let q = libm::exp(logq[k]);
            *g = (q - t[k] - entropy_weight * q * (logq[k] + h)) * inv_n;
        }
    }
    Ok((total * inv_n, grad))
}

/// Gradient of a loss with respect to classifier parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierGrad {
    pub weights: Matrix,
    pub bias: Vec<f64>,
}

/// `eac_loss` at `(clf, features, targets)` plus its parameter gradient.
pub fn classifier_loss_and_grad(
    clf: &LinearClassifier,
    features: &Matrix,
    targets: &Matrix,
    entropy_weight: f64,
) -> Result<(f64, ClassifierGrad)> {
    let logits = classifier_forward(clf, features)?;
    let (loss, d_logits) = eac_loss_and_grad(&logits, targets, entropy_weight)?;
    let weights = features.t_matmul(&d_logits)?;
    let mut bias = vec![0.0; clf.classes()];
    for row in d_logits.iter_rows() {
        for (b, g) in bias.iter_mut().zip(row) {
            *b += g;
        }
    }
    Ok((loss, ClassifierGrad { weights, bias }))
}

/// Settings for one optimizer step beyond the Adam hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOptions {
    pub entropy_weight: f64,
    pub weight_decay: f64,
    pub update_bias: bool,
}

/// One Adam step on `eac_loss` (plus `weight_decay/2·‖W‖²`). Returns the loss
/// before the update.
pub fn classifier_step(
    clf: &mut LinearClassifier,
    state: &mut AdamState,
    adam: &AdamConfig,
    features: &Matrix,
    targets: &Matrix,
    opts: StepOptions,
) -> Result<f64> {
    let (mut loss, mut grad) = classifier_loss_and_grad(clf, features, targets, opts.entropy_weight)?;
    if opts.weight_decay != 0.0 {
        grad.weights.axpy(opts.weight_decay, &clf.weights)?;
        loss += 0.5 * opts.weight_decay * clf.weights.as_slice().iter().map(|w| w * w).sum::<f64>();
    }
    grad.weights.ensure_finite("classifier gradient")?;
    if let Some(index) = grad.bias.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            what: "classifier gradient",
            index,
        });
    }
    if !loss.is_finite() {
        return Err(Error::NonFinite {
            what: "classifier loss",
            index: 0,
        });
    }

    state.t += 1;
    let t = state.t;
    adam_update(
        adam,
        t,
        clf.weights.as_mut_slice(),
        grad.weights.as_slice(),
        state.m_w.as_mut_slice(),
        state.v_w.as_mut_slice(),
    );
    if opts.update_bias {
        adam_update(adam, t, &mut clf.bias, &grad.bias, &mut state.m_b, &mut state.v_b);
    }
    Ok(loss)
}

/// One EAC training step on a batch with soft targets.
pub fn eac_train_step(
    clf: &mut LinearClassifier,
    state: &mut AdamState,
    features: &Matrix,
    targets: &Matrix,
    cfg: &EacConfig,
) -> Result<f64> {
    let opts = StepOptions {
        entropy_weight: cfg.entropy_weight,
        weight_decay: 0.0,
        update_bias: cfg.use_bias,
    };
    classifier_step(clf, state, &cfg.optimizer, features, targets, opts)
}

/// `(1−η)·Y + η·logits` over every row.
pub fn eac_label_update(current: &Matrix, logits: &Matrix, eta: f64) -> Result<Matrix> {
    logits.ensure_shape("eac_label_update", current.rows(), current.cols())?;
    if !(0.0..=1.0).contains(&eta) {
        return Err(invalid("eta_e must lie in [0, 1]"));
    }
    let mut out = current.clone();
    for (y, l) in out.as_mut_slice().iter_mut().zip(logits.as_slice()) {
        *y = (1.0 - eta) * *y + eta * l;
    }
    Ok(out)
}

/// Blends in probability space and maps back to logits at temperature `alpha`.
pub fn eac_label_update_probability(current: &Matrix, logits: &Matrix, eta: f64, alpha: f64) -> Result<Matrix> {
    logits.ensure_shape("eac_label_update", current.rows(), current.cols())?;
    if !(0.0..=1.0).contains(&eta) {
        return Err(invalid("eta_e must lie in [0, 1]"));
    }
    let p_cur = softmax_rows(current, alpha);
    let p_new = softmax_rows(logits, 1.0);
    let mut out = Matrix::zeros(current.rows(), current.cols());
    for ((o, a), b) in out
        .as_mut_slice()
        .iter_mut()
        .zip(p_cur.as_slice())
        .zip(p_new.as_slice())
    {
        let p = (1.0 - eta) * a + eta * b;
        *o = libm::log(p.max(f64::MIN_POSITIVE)) / alpha;
    }
    Ok(out)
}
