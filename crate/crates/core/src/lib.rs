//! Label purification over frozen feature embeddings.
//!
//! Noisy training labels are held as a matrix of logits and corrected by two
//! interleaved processes:
//!
//! * [`ipc`]: gradient descent on the logits of each batch through a
//!   closed-form ridge regression, driven by the prediction error on a small
//!   clean validation set;
//! * [`eac`]: a linear classifier trained on the corrected soft labels whose
//!   logits periodically replace the label logits.
//!
//! [`purifier::purify`] runs the loop. [`noise`] generates synthetic
//! embeddings and corrupted labels, and [`evaluate`] retrains and scores
//! linear heads on the result.
//!
//! The crate is `no_std` and only needs `alloc`.

#![cfg_attr(not(test), no_std)]
// `!(x > 0.0)` also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod eac;
pub mod error;
pub mod evaluate;
pub mod ipc;
pub mod labels;
pub mod linalg;
pub mod matrix;
pub mod noise;
pub mod purifier;
pub mod rng;

pub use error::{Error, Result};
pub use labels::{init_logits, CleanValidationSet, FeatureMatrix, HardLabels, LabelLogits};
pub use matrix::Matrix;
pub use purifier::{purify, CorrectionReport, PurifierConfig};
