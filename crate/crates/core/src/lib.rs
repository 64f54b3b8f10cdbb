//! Hybrid quantum-classical neural network toolkit.
//!
//! The crate is organised bottom-up:
//!
//! - [`tensor`]: dense float64 tensors and a tape-based reverse-mode
//!   autodiff engine with the convolutional, attention and loss primitives.
//! - [`qsim`]: exact statevector simulation of the angle-encoded,
//!   strongly entangling variational circuit, exposed as a differentiable
//!   layer with adjoint and parameter-shift gradients.
//! - [`model`]: the full hybrid network (CNN extractor, self-attention,
//!   cross-attention against learnable quantum embeddings, positional
//!   encoding, gating, circuit, classifier head) plus a classical ablation.
//! - [`data`]: image ingestion, preprocessing, augmentation, stratified
//!   splitting and a synthetic thermography generator.
//! - [`train`]: Adam, learning-rate schedule, early stopping, metrics,
//!   ROC/AUC, paired t-tests and multi-seed experiments.
//! - [`cli`]: the command implementations behind the `hqnn` binary.
//!
//! Data-parallel loops (per-sample convolution, per-sample circuit
//! evaluation, independent seeds) use rayon when the `parallel` feature is
//! enabled, and fall back to sequential iteration otherwise. Results are
//! bitwise identical either way because every reduction is performed in a
//! fixed order.

pub mod cli;
pub mod data;
pub mod error;
pub mod model;
pub mod par;
pub mod qsim;
pub mod rng;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};
