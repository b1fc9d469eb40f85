//! Intrinsic primary correction.
//!
//! A ridge regression fitted in closed form on one training batch maps the
//! batch's soft labels `S = softmax(α·Y)` to predictions on the clean
//! validation features:
//!
//! ```text
//! W = (FᵀF + λI)⁻¹ Fᵀ S
//! P = F_v W
//! L = 1/N_v · Σᵢ ‖Pᵢ − yᵢ‖² + γ · H(softmax(Pᵢ))
//! ```
//!
//! Because every step is differentiable, `∂L/∂Y` is available in closed
//! form and the batch logits move by plain gradient descent.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::labels::{log_softmax_into, softmax_rows, CleanValidationSet};
use crate::linalg::Cholesky;
use crate::matrix::Matrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IpcConfig {
    /// Softmax temperature applied to label logits.
    pub alpha: f64,
    /// Ridge coefficient.
    pub lambda: f64,
    /// Label learning rate.
    pub eta: f64,
    /// Weight of the prediction-entropy term in the validation loss.
    pub entropy_weight: f64,
    /// Validation rows sampled per step; `None` uses the whole set.
    pub val_batch: Option<usize>,
    /// Use `(1/b)·FᵀF + λI` instead of `FᵀF + λI`.
    pub normalize_gram: bool,
    /// Append a constant-1 feature so the ridge model has an intercept.
    pub bias_feature: bool,
}

impl Default for IpcConfig {
    fn default() -> Self {
        IpcConfig {
            alpha: 1.0,
            lambda: 1.0,
            eta: 0.01,
            entropy_weight: 1.0,
            val_batch: None,
            normalize_gram: false,
            bias_feature: false,
        }
    }
}

impl IpcConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v > 0.0 && v.is_finite();
        if !positive(self.alpha) {
            return Err(invalid("alpha must be positive"));
        }
        if !positive(self.lambda) {
            return Err(invalid("lambda must be positive"));
        }
        if !positive(self.eta) {
            return Err(invalid("eta_i must be positive"));
        }
        if !(self.entropy_weight >= 0.0 && self.entropy_weight.is_finite()) {
            return Err(invalid("entropy weight must be non-negative"));
        }
        if self.val_batch == Some(0) {
            return Err(invalid("validation batch must be positive"));
        }
        Ok(())
    }

    /// Ridge coefficient applied to the unnormalized Gram matrix of a batch
    /// with `rows` samples.
    pub fn effective_lambda(&self, rows: usize) -> f64 {
        if self.normalize_gram {
            self.lambda * rows as f64
        } else {
            self.lambda
        }
    }
}

/// Factored ridge system `FᵀF + λI` for one batch, shared by the forward and
/// backward passes.
#[derive(Debug, Clone)]
pub struct RidgeSystem<'a> {
    features: &'a Matrix,
    chol: Cholesky,
    lambda: f64,
}

impl<'a> RidgeSystem<'a> {
    pub fn new(features: &'a Matrix, lambda: f64) -> Result<Self> {
        if !(lambda >= 0.0) || !lambda.is_finite() {
            return Err(invalid("lambda must be non-negative and finite"));
        }
        let chol = Cholesky::factor(&features.gram(lambda))?;
        Ok(RidgeSystem { features, chol, lambda })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Ridge weights for the given regression targets.
    pub fn weights(&self, targets: &Matrix) -> Result<Matrix> {
        self.chol.solve(&self.features.t_matmul(targets)?)
    }

    /// Maps `∂L/∂W` to `∂L/∂targets`, i.e. `F (FᵀF + λI)⁻¹ ∂L/∂W`.
    pub fn pullback(&self, d_weights: &Matrix) -> Result<Matrix> {
        self.features.matmul(&self.chol.solve(d_weights)?)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RidgeSolution {
    pub weights: Matrix,
    pub lambda: f64,
    pub alpha: f64,
}

/// Closed-form minimizer of `‖softmax(αY) − F w‖² + λ‖w‖²`, solved through a
/// Cholesky factorization of `FᵀF + λI`.
pub fn ridge_fit(features: &Matrix, logits: &Matrix, alpha: f64, lambda: f64) -> Result<RidgeSolution> {
    if logits.rows() != features.rows() {
        return Err(Error::DimensionMismatch {
            op: "ridge_fit",
            expected: (features.rows(), logits.cols()),
            found: logits.shape(),
        });
    }
    if !(alpha > 0.0) {
        return Err(invalid("alpha must be positive"));
    }
    let system = RidgeSystem::new(features, lambda)?;
    let weights = system.weights(&softmax_rows(logits, alpha))?;
    Ok(RidgeSolution { weights, lambda, alpha })
}

/// `F · W`: one prediction row per feature row.
pub fn ridge_predict(sol: &RidgeSolution, features: &Matrix) -> Result<Matrix> {
    if features.cols() != sol.weights.rows() {
        return Err(Error::DimensionMismatch {
            op: "ridge_predict",
            expected: (features.rows(), sol.weights.rows()),
            found: features.shape(),
        });
    }
    features.matmul(&sol.weights)
}

/// Mean over rows of squared error plus `γ`-weighted entropy of the
/// softmax of each prediction.
pub fn validation_loss(pred: &Matrix, targets: &Matrix, entropy_weight: f64) -> Result<f64> {
    Ok(validation_loss_and_grad(pred, targets, entropy_weight, false)?.0)
}

/// Loss and, if requested, `∂L/∂pred`.
pub fn validation_loss_and_grad(
    pred: &Matrix,
    targets: &Matrix,
    entropy_weight: f64,
    with_grad: bool,
) -> Result<(f64, Option<Matrix>)> {
    targets.ensure_shape("validation_loss", pred.rows(), pred.cols())?;
    let (n, c) = pred.shape();
    if n == 0 {
        return Err(invalid("validation loss over zero rows"));
    }
    let inv_n = 1.0 / n as f64;
    let mut grad = with_grad.then(|| Matrix::zeros(n, c));
    let mut logq = alloc::vec![0.0; c];
    let mut total = 0.0;
    for i in 0..n {
        let (p, y) = (pred.row(i), targets.row(i));
        let sq: f64 = p.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
        let mut entropy = 0.0;
        if entropy_weight != 0.0 {
            log_softmax_into(p, &mut logq);
            entropy = -logq.iter().map(|&l| libm::exp(l) * l).sum::<f64>();
        }
        total += sq + entropy_weight * entropy;

        if let Some(g) = grad.as_mut() {
            let row = g.row_mut(i);
            for k in 0..c {
                let mut v = 2.0 * (p[k] - y[k]);
                if entropy_weight != 0.0 {
                    // ∂H/∂p_k = −q_k (log q_k + H)
                    let q = libm::exp(logq[k]);
                    v -= entropy_weight * q * (logq[k] + entropy);
                }
                row[k] = v * inv_n;
            }
        }
    }
    Ok((total * inv_n, grad))
}

/// Validation loss of a batch together with its gradient.
#[derive(Debug, Clone)]
pub struct LabelGradient {
    pub loss: f64,
    pub grad: Matrix,
}

/// `∇_Y L_val` for one training batch.
pub fn label_gradient(features: &Matrix, logits: &Matrix, val: &CleanValidationSet, cfg: &IpcConfig) -> Result<Matrix> {
    Ok(label_gradient_with_loss(features, logits, val, cfg)?.grad)
}

pub fn label_gradient_with_loss(
    features: &Matrix,
    logits: &Matrix,
    val: &CleanValidationSet,
    cfg: &IpcConfig,
) -> Result<LabelGradient> {
    let (b, c) = logits.shape();
    if features.rows() != b {
        return Err(Error::DimensionMismatch {
            op: "label_gradient",
            expected: (b, features.cols()),
            found: features.shape(),
        });
    }
    let vf = val.features().matrix();
    if vf.cols() != features.cols() || val.classes() != c {
        return Err(Error::DimensionMismatch {
            op: "label_gradient (validation)",
            expected: (vf.rows(), features.cols()),
            found: vf.shape(),
        });
    }
    if !(cfg.alpha > 0.0) {
        return Err(invalid("alpha must be positive"));
    }

    let system = RidgeSystem::new(features, cfg.effective_lambda(b))?;
    let soft = softmax_rows(logits, cfg.alpha);
    let weights = system.weights(&soft)?;
    let pred = vf.matmul(&weights)?;
    let (loss, d_pred) = validation_loss_and_grad(&pred, val.labels(), cfg.entropy_weight, true)?;
    let d_pred = d_pred.expect("gradient requested");

    let d_soft = system.pullback(&vf.t_matmul(&d_pred)?)?;

    // row-wise softmax Jacobian: ∂Y_ij = α s_ij (∂S_ij − Σ_k s_ik ∂S_ik)
    let mut grad = Matrix::zeros(b, c);
    for i in 0..b {
        let (s, ds) = (soft.row(i), d_soft.row(i));
        let dot: f64 = s.iter().zip(ds).map(|(a, b)| a * b).sum();
        for (k, g) in grad.row_mut(i).iter_mut().enumerate() {
            *g = cfg.alpha * s[k] * (ds[k] - dot);
        }
    }
    Ok(LabelGradient { loss, grad })
}

/// `Y − η · grad`. A non-finite gradient aborts the step.
pub fn ipc_step(logits: &Matrix, grad: &Matrix, eta: f64) -> Result<Matrix> {
    grad.ensure_shape("ipc_step", logits.rows(), logits.cols())?;
    grad.ensure_finite("label gradient")?;
    if !(eta >= 0.0) {
        return Err(invalid("eta_i must be non-negative"));
    }
    let mut out = logits.clone();
    out.axpy(-eta, grad)?;
    Ok(out)
}
