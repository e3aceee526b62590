//! Differentiable building blocks of the classifier.
//!
//! Every parameter struct is generic over its leaf type: `Tensor` when the
//! weights are stored, [`Var`](crate::tensor::Var) once they are bound to a
//! tape for a forward pass, and again `Tensor` for gradients and optimizer
//! moments. `map` converts between these, `leaves` walks them in a fixed order.
//!
//! Layers work on batches laid out row-wise (`[B×features]`); a single sample
//! is a batch of one.

mod attention;
mod dense;
mod init;
mod lstm;
mod residual;

pub use attention::{attention_pool, AttentionParams};
pub use dense::{dense_forward, DenseParams};
pub use init::{glorot_uniform, ParamRng};
pub use lstm::{bilstm_forward, lstm_cell_step, BiLstmLayer, LstmParams};
pub use residual::{conv_forward, residual_block_forward, ConvParams, ResidualBlockParams};

use crate::tensor::{Tape, TensorError, Var};

/// Mean cross-entropy of `logits` (`[K]` or `[B×K]`) against class labels.
pub fn cross_entropy(tape: &Tape, logits: Var, labels: &[usize]) -> Result<Var, TensorError> {
    tape.cross_entropy(logits, labels)
}
