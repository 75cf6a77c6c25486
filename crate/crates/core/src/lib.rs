//! Selective output smoothing regularization.
//!
//! For training samples the model already classifies correctly with
//! probability above a threshold `P`, an extra mean-squared term pulls every
//! non-target logit toward the mean of the non-target logits:
//!
//! ```text
//! L = CE(O, Y) + β · (1/MK) Σ (õ − o)²
//! ```
//!
//! The crate bundles the loss ([`regularizer`]), a small CPU network stack
//! with reverse-mode gradients ([`nn`]), dataset generation, loading and
//! augmentation ([`data`]) and an experiment harness ([`harness`]).
//!
//! ```
//! use sosr::{LogitBatch64, regularizer::{build_desired_output, detect_overconfident}};
//!
//! let logits = LogitBatch64::from_rows(&[[2.0, 1.0, 1.0, 0.0]]).unwrap();
//! let mask = detect_overconfident(&logits, &[0], 0.5).unwrap();
//! let desired = build_desired_output(&logits, &mask).unwrap();
//! assert_eq!(desired.values.row(0)[0], 2.0);
//! assert!((desired.values.row(0)[3] - 2.0 / 3.0).abs() < 1e-15);
//! ```

pub mod batch;
pub mod data;
pub mod error;
pub mod harness;
pub mod nn;
pub mod regularizer;
pub mod scalar;

pub use batch::{argmax, LogitBatch, Matrix, ProbBatch};
pub use error::{Error, Result};
pub use scalar::Scalar;

pub type LogitBatch32 = LogitBatch<f32>;
pub type LogitBatch64 = LogitBatch<f64>;
pub type Model32 = nn::Model<f32>;
pub type Model64 = nn::Model<f64>;
pub type Tensor32 = nn::Tensor<f32>;
pub type Tensor64 = nn::Tensor<f64>;
