//! The purification loop: per batch one IPC label step followed by EAC
//! classifier training, with a periodic EAC relabeling of the whole set.

use alloc::boxed::Box;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::eac::{
    classifier_forward, eac_label_update, eac_label_update_probability, eac_train_step, AdamState, BlendSpace,
    EacConfig, LinearClassifier,
};
use crate::error::{invalid, Error, Result};
use crate::ipc::{ipc_step, label_gradient_with_loss, IpcConfig};
use crate::labels::{init_logits_scaled, softmax_rows, CleanValidationSet, FeatureMatrix, HardLabels, LabelLogits};
use crate::noise::label_accuracy;
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PurifierConfig {
    pub ipc: IpcConfig,
    pub eac: EacConfig,
    pub batch_size: usize,
    pub epochs: usize,
    pub shuffle_seed: u64,
    /// Multiplier for the one-hot initial logits.
    pub init_scale: f64,
    /// L2-normalize every feature row (training and validation) first.
    pub normalize_features: bool,
    /// Apply IPC label steps. Disabling leaves EAC alone.
    pub ipc_enabled: bool,
    /// Train the auxiliary classifier and apply its periodic relabeling.
    pub eac_enabled: bool,
}

impl Default for PurifierConfig {
    fn default() -> Self {
        PurifierConfig {
            ipc: IpcConfig::default(),
            eac: EacConfig::default(),
            batch_size: 256,
            epochs: 100,
            shuffle_seed: 0,
            init_scale: 1.0,
            normalize_features: false,
            ipc_enabled: true,
            eac_enabled: true,
        }
    }
}

impl PurifierConfig {
    pub fn validate(&self) -> Result<()> {
        self.ipc.validate()?;
        self.eac.validate()?;
        if self.batch_size < 2 {
            return Err(invalid("batch size must be at least 2"));
        }
        if self.epochs == 0 {
            return Err(invalid("epochs must be at least 1"));
        }
        if !(self.init_scale > 0.0 && self.init_scale.is_finite()) {
            return Err(invalid("init scale must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub p: u64,
    pub epoch: usize,
    pub val_loss: f64,
    pub grad_norm: f64,
    pub eac_update: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub acc: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ReportSummary {
    pub iterations: u64,
    pub eac_updates: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_acc: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub final_acc: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub final_val_loss: Option<f64>,
    /// Filled in by callers that can read a clock.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_time_secs: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CorrectionReport {
    pub records: Vec<IterationRecord>,
    pub summary: ReportSummary,
}

#[derive(Debug, Clone)]
pub struct Purified {
    pub logits: LabelLogits,
    pub labels: HardLabels,
    pub classifier: LinearClassifier,
    pub report: CorrectionReport,
}

/// Runs the purifier. `truth`, when given, is only used to fill accuracy
/// fields of the report.
pub fn purify(
    features: &FeatureMatrix,
    noisy: &HardLabels,
    val: &CleanValidationSet,
    cfg: &PurifierConfig,
    truth: Option<&HardLabels>,
) -> Result<Purified> {
    cfg.validate()?;
    let n = features.rows();
    let c = noisy.classes();
    if noisy.len() != n {
        return Err(Error::DimensionMismatch {
            op: "purify (labels)",
            expected: (n, 1),
            found: (noisy.len(), 1),
        });
    }
    if val.features().dim() != features.dim() || val.classes() != c {
        return Err(Error::DimensionMismatch {
            op: "purify (validation)",
            expected: (val.len(), features.dim()),
            found: (val.len(), val.features().dim()),
        });
    }
    if let Some(t) = truth {
        if t.len() != n {
            return Err(Error::DimensionMismatch {
                op: "purify (truth)",
                expected: (n, 1),
                found: (t.len(), 1),
            });
        }
    }

    let (train, val) = if cfg.normalize_features {
        (features.l2_normalized(), val.map_features(FeatureMatrix::l2_normalized))
    } else {
        (features.clone(), val.clone())
    };
    let (ridge_train, ridge_val) = if cfg.ipc.bias_feature {
        (
            train.with_bias_column(),
            val.map_features(FeatureMatrix::with_bias_column),
        )
    } else {
        (train.clone(), val.clone())
    };

    let mut logits = init_logits_scaled(noisy, cfg.init_scale);
    let mut clf = LinearClassifier::zeros(train.dim(), c);
    let mut adam = AdamState::new(train.dim(), c);

    let mut shuffle_rng = rng::stream(cfg.shuffle_seed, rng::STREAM_SHUFFLE);
    let mut val_rng = rng::stream(cfg.shuffle_seed, rng::STREAM_VAL_BATCH);
    let val_batch = cfg.ipc.val_batch.filter(|&k| k < ridge_val.len());

    let mut report = CorrectionReport::default();
    if let Some(t) = truth {
        report.summary.initial_acc = Some(label_accuracy(&logits.hard_labels(), t)?);
    }

    let mut p: u64 = 0;
    for epoch in 0..cfg.epochs {
        let order = rng::permutation(&mut shuffle_rng, n);
        for idx in order.chunks(cfg.batch_size) {
            let iteration = p + 1;
            let at = move |source: Error| Error::AtIteration {
                epoch,
                iteration,
                source: Box::new(source),
            };

            let val_used;
            let val_ref = match val_batch {
                Some(k) => {
                    let mut pick = rand::seq::index::sample(&mut val_rng, ridge_val.len(), k).into_vec();
                    pick.sort_unstable();
                    val_used = ridge_val.select(&pick);
                    &val_used
                }
                None => &ridge_val,
            };

            let batch_feats = ridge_train.matrix().select_rows(idx);
            let batch_logits = logits.select_rows(idx);
            let lg = label_gradient_with_loss(&batch_feats, &batch_logits, val_ref, &cfg.ipc).map_err(at)?;
            let grad_norm = lg.grad.frobenius_norm();

            let updated = if cfg.ipc_enabled {
                let stepped = ipc_step(&batch_logits, &lg.grad, cfg.ipc.eta).map_err(at)?;
                let y = logits.matrix_mut();
                for (r, &i) in idx.iter().enumerate() {
                    y.row_mut(i).copy_from_slice(stepped.row(r));
                }
                stepped
            } else {
                batch_logits
            };

            if cfg.eac_enabled {
                let targets = if cfg.eac.hard_targets {
                    LabelLogits::new(updated.clone()).map_err(at)?.hard_labels().one_hot()
                } else {
                    softmax_rows(&updated, cfg.ipc.alpha)
                };
                let clf_feats = train.matrix().select_rows(idx);
                for _ in 0..cfg.eac.steps_per_iter {
                    eac_train_step(&mut clf, &mut adam, &clf_feats, &targets, &cfg.eac).map_err(at)?;
                }
            }

            p += 1;
            let eac_update = cfg.eac_enabled && p.is_multiple_of(cfg.eac.period);
            if eac_update {
                let all = classifier_forward(&clf, train.matrix()).map_err(at)?;
                let blended = match cfg.eac.blend_space {
                    BlendSpace::Logit => eac_label_update(logits.matrix(), &all, cfg.eac.eta),
                    BlendSpace::Probability => {
                        eac_label_update_probability(logits.matrix(), &all, cfg.eac.eta, cfg.ipc.alpha)
                    }
                }
                .map_err(at)?;
                logits = LabelLogits::new(blended).map_err(at)?;
                report.summary.eac_updates += 1;
            }

            let acc = match truth {
                Some(t) => Some(label_accuracy(&logits.hard_labels(), t)?),
                None => None,
            };
            report.records.push(IterationRecord {
                p,
                epoch,
                val_loss: lg.loss,
                grad_norm,
                eac_update,
                acc,
            });
        }
    }

    report.summary.iterations = p;
    report.summary.final_acc = report.records.last().and_then(|r| r.acc).or(report.summary.initial_acc);
    report.summary.final_val_loss = report.records.last().map(|r| r.val_loss);

    let labels = logits.hard_labels();
    Ok(Purified {
        logits,
        labels,
        classifier: clf,
        report,
    })
}
