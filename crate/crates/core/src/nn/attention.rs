use crate::tensor::{shape_err, Real, Tape, Tensor, TensorError, Var};

use super::dense::{dense_forward, DenseParams};
use super::init::ParamRng;

/// Query projection applied to the last hidden state (`2H → 2H`).
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionParams<P = Tensor> {
    pub query: DenseParams<P>,
}

impl AttentionParams<Tensor> {
    pub fn init(width: usize, rng: &mut ParamRng) -> Self {
        AttentionParams {
            query: DenseParams::init(width, width, rng),
        }
    }
}

impl<P> AttentionParams<P> {
    pub fn map<Q>(&self, f: &mut impl FnMut(&P) -> Q) -> AttentionParams<Q> {
        AttentionParams {
            query: self.query.map(f),
        }
    }

    pub fn leaves(&self) -> Vec<&P> {
        self.query.leaves()
    }

    pub fn leaves_mut(&mut self) -> Vec<&mut P> {
        self.query.leaves_mut()
    }
}

/// Pools a sequence of hidden states (`T` tensors of `[B×W]`) into one
/// context vector per batch row.
///
/// The query is the projected last state; each step is scored by its dot
/// product with the query (divided by `√W` when `scaled`), the scores are
/// softmax-normalized, and the context is the weighted sum of the states.
/// Returns `(context [B×W], weights [B×T])`.
pub fn attention_pool(
    tape: &Tape,
    p: &AttentionParams<Var>,
    hiddens: &[Var],
    scaled: bool,
) -> Result<(Var, Var), TensorError> {
    let Some(&last) = hiddens.last() else {
        return Err(shape_err("attention_pool", "empty sequence"));
    };
    let query = dense_forward(tape, &p.query, last)?;
    let mut scores = hiddens
        .iter()
        .map(|&h| tape.row_dot(query, h))
        .collect::<Result<Vec<_>, _>>()?;
    if scaled {
        let width = *tape.shape(last).last().unwrap() as Real;
        scores = scores.into_iter().map(|s| tape.scale(s, 1.0 / width.sqrt())).collect();
    }
    let weights = tape.softmax(tape.concat_cols(&scores)?);
    let mut context = None;
    for (t, &h) in hiddens.iter().enumerate() {
        let term = tape.scale_rows(tape.slice_cols(weights, t, 1)?, h)?;
        context = Some(match context {
            Some(acc) => tape.add(acc, term)?,
            None => term,
        });
    }
    Ok((context.expect("non-empty sequence"), weights))
}
