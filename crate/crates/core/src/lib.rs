//! Core primitives for assessing membership-inference risk of small classifiers.
//!
//! The crate bundles everything needed to run a desk-scale privacy evaluation
//! in memory, with no IO:
//!
//! * [`tensor`]/[`graph`]/[`optim`] — a dense-tensor reverse-mode autodiff
//!   engine with momentum SGD, cosine annealing, and per-sample gradients;
//! * [`data`]/[`augment`] — datasets, the six-way split, synthetic sources,
//!   and the augmentation pipelines;
//! * [`model`]/[`train`] — MLP / small CNN builders and training loops with
//!   defense hooks;
//! * [`attack`] — neural-network, metric-based, label-only, and
//!   augmented-view membership inference attacks;
//! * [`defense`] — label smoothing, adversarial regularization, posterior
//!   perturbation, mixup + MMD, and DP-SGD;
//! * [`risk`] — entropy/cross-entropy score distributions, Jensen-Shannon
//!   distance, and linear risk calibration;
//! * [`eval`] — verdict-level accuracy, precision, recall, F1, and AUC.
//!
//! Everything is deterministic given explicit seeds. The crate is `no_std`
//! compatible (with `alloc`); disable the default `std` feature to use it in
//! a `no_std` environment.

#![cfg_attr(not(feature = "std"), no_std)]
#![forbid(unsafe_code)]

#[macro_use]
extern crate alloc;

pub mod attack;
pub mod augment;
pub mod data;
pub mod defense;
pub mod error;
pub mod eval;
pub mod graph;
pub mod model;
pub mod optim;
pub mod posterior;
pub mod risk;
pub mod rngutil;
pub mod tensor;
pub mod train;

pub use error::Error;
pub use posterior::Posteriors;
pub use tensor::Tensor;

/// Crate-wide result alias.
pub type Result<T, E = Error> = core::result::Result<T, E>;
