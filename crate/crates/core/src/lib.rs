//! Modulation recognition from raw IQ frames.
//!
//! The crate is a small, self-contained lab:
//!
//! * [`tensor`]: row-major tensors with a reverse-mode tape and a
//!   finite-difference gradient checker.
//! * [`nn`]: dense layers, residual 1-D conv blocks, LSTM cells, stacked
//!   bidirectional LSTMs, attention pooling and cross-entropy.
//! * [`model`]: the full classifier (residual blocks, conv reduction,
//!   attention BiLSTM, three dense layers) and its parameter file.
//! * [`synth`]: SNR-calibrated synthetic IQ frames for BPSK, QPSK, 8PSK,
//!   16QAM, PAM4, CPFSK, AM and FM.
//! * [`data`]: the portable dataset file, stratified splits, batching.
//! * [`train`]: Adam training, per-SNR confusion matrices and reports.
//! * [`cli`]: the `modrec` command line front end.

// Casts through `Real` are no-ops in the default f64 build but not with `f32`.
#![allow(clippy::unnecessary_cast)]

pub mod cli;
pub mod data;
pub mod model;
pub mod nn;
mod seeds;
pub mod synth;
pub mod tensor;
pub mod train;

pub use data::{Dataset, DatasetHeader, IqFrame};
pub use model::{Model, ModelConfig};
pub use tensor::{Real, Tape, Tensor, Var};
