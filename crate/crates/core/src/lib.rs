//! Core of the MIMD-3DVT pipeline: a multiple-input, mixed-data 3D vision
//! transformer for binary volumetric classification.
//!
//! Everything in this crate is pure computation over in-memory values and
//! only needs `alloc`. File formats, the command line and parallel drivers
//! live in the `mimd3dvt` companion crate.
//!
//! Module map:
//!
//! * [`tensor`] / [`autodiff`]: dense f64 arrays and a define-by-run tape
//!   with reverse-mode gradients.
//! * [`model`]: tubelet embedding, transformer encoder branches, tabular MLP
//!   and the concatenation fusion head.
//! * [`data`]: subject records, balancing, leakage-free splits, scaling,
//!   ROI instance selection, cropping, batching and a synthetic generator.
//! * [`trainer`]: Adam with exponential learning-rate decay.
//! * [`metrics`]: confusion matrices, ROC/AUC, k-fold CV and hypothesis tests.
//! * [`tuner`]: Hyperband with successive halving.
#![cfg_attr(not(test), no_std)]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod autodiff;
pub mod data;
pub mod error;
pub mod math;
pub mod metrics;
pub mod model;
pub mod rng;
pub mod tensor;
pub mod trainer;
pub mod tuner;

pub use autodiff::{Gradients, Tape, Var};
pub use error::{Error, Result};
pub use tensor::Tensor;
