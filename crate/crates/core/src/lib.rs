//! Missing-view imputation for two-view tabular data.
//!
//! Two domain mappings (`G1: X → Y`, `G2: Y → X`) are trained adversarially
//! with a cycle-consistency penalty, and a multi-modal denoising autoencoder
//! refines their cross-view estimates using the paired examples. Everything
//! runs on a small eager autodiff engine with `f64` precision.
//!
//! The modules mirror the pipeline:
//!
//! * [`autodiff`] — tensors, the operation graph and gradient checking
//! * [`nn`] — dense layers, MLPs and Adam
//! * [`model`] — the five networks, their losses and the `VIGM` file format
//! * [`train`] — the three-stage training schedule
//! * [`data`] — datasets, CSV ingestion, normalization and synthetic generators
//! * [`metrics`] — RMSE, Hamming accuracy, baselines and evaluation

pub mod autodiff;
pub mod data;
pub mod error;
pub mod fsutil;
pub mod metrics;
pub mod model;
pub mod nn;
pub mod train;

pub use error::{Result, ViganError};
