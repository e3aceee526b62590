use crate::tensor::{shape_err, Tape, Tensor, TensorError, Var};

use super::init::{glorot_uniform, ParamRng};

/// One LSTM direction. Gate blocks are stacked in the order (i, f, g, o):
/// rows `0..H` drive the input gate, `H..2H` the forget gate, `2H..3H` the
/// candidate and `3H..4H` the output gate.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmParams<P = Tensor> {
    /// `[4H×D]`
    pub input_weights: P,
    /// `[4H×H]`
    pub recurrent_weights: P,
    /// `[4H]`
    pub bias: P,
}

impl LstmParams<Tensor> {
    /// Glorot weights, zero biases except the forget gate, which starts at 1.
    pub fn init(inputs: usize, hidden: usize, rng: &mut ParamRng) -> Self {
        let mut bias = Tensor::zeros(&[4 * hidden]);
        bias.data_mut()[hidden..2 * hidden].fill(1.0);
        LstmParams {
            input_weights: glorot_uniform(&[4 * hidden, inputs], inputs, 4 * hidden, rng),
            recurrent_weights: glorot_uniform(&[4 * hidden, hidden], hidden, 4 * hidden, rng),
            bias,
        }
    }

    pub fn hidden(&self) -> usize {
        self.recurrent_weights.shape()[1]
    }
}

impl<P> LstmParams<P> {
    pub fn map<Q>(&self, f: &mut impl FnMut(&P) -> Q) -> LstmParams<Q> {
        LstmParams {
            input_weights: f(&self.input_weights),
            recurrent_weights: f(&self.recurrent_weights),
            bias: f(&self.bias),
        }
    }

    pub fn leaves(&self) -> Vec<&P> {
        vec![&self.input_weights, &self.recurrent_weights, &self.bias]
    }

    pub fn leaves_mut(&mut self) -> Vec<&mut P> {
        vec![&mut self.input_weights, &mut self.recurrent_weights, &mut self.bias]
    }
}

/// A bidirectional layer: left-to-right and right-to-left cells.
#[derive(Debug, Clone, PartialEq)]
pub struct BiLstmLayer<P = Tensor> {
    pub forward: LstmParams<P>,
    pub backward: LstmParams<P>,
}

impl BiLstmLayer<Tensor> {
    pub fn init(inputs: usize, hidden: usize, rng: &mut ParamRng) -> Self {
        BiLstmLayer {
            forward: LstmParams::init(inputs, hidden, rng),
            backward: LstmParams::init(inputs, hidden, rng),
        }
    }
}

impl<P> BiLstmLayer<P> {
    pub fn map<Q>(&self, f: &mut impl FnMut(&P) -> Q) -> BiLstmLayer<Q> {
        BiLstmLayer {
            forward: self.forward.map(f),
            backward: self.backward.map(f),
        }
    }

    pub fn leaves(&self) -> Vec<&P> {
        let mut out = self.forward.leaves();
        out.extend(self.backward.leaves());
        out
    }

    pub fn leaves_mut(&mut self) -> Vec<&mut P> {
        let mut out = self.forward.leaves_mut();
        out.extend(self.backward.leaves_mut());
        out
    }
}

/// Applies the gate nonlinearities to pre-activations `[B×4H]`.
fn gates(tape: &Tape, pre: Var, c_prev: Option<Var>, hidden: usize) -> Result<(Var, Var), TensorError> {
    let i = tape.sigmoid(tape.slice_cols(pre, 0, hidden)?);
    let g = tape.tanh(tape.slice_cols(pre, 2 * hidden, hidden)?);
    let o = tape.sigmoid(tape.slice_cols(pre, 3 * hidden, hidden)?);
    let mut c = tape.mul(i, g)?;
    if let Some(c_prev) = c_prev {
        let f = tape.sigmoid(tape.slice_cols(pre, hidden, hidden)?);
        c = tape.add(tape.mul(f, c_prev)?, c)?;
    }
    let h = tape.mul(o, tape.tanh(c))?;
    Ok((h, c))
}

/// One LSTM step on `x_t: [B×D]` (or `[D]`) with state `[B×H]` (or `[H]`).
/// Returns `(h, c)` shaped `[B×H]`.
pub fn lstm_cell_step(
    tape: &Tape,
    p: &LstmParams<Var>,
    x_t: Var,
    h_prev: Var,
    c_prev: Var,
) -> Result<(Var, Var), TensorError> {
    let hidden = tape.shape(p.recurrent_weights)[1];
    let x_part = tape.matmul_nt(x_t, p.input_weights)?;
    let h_part = tape.matmul_nt(h_prev, p.recurrent_weights)?;
    let x_part = as_rows(tape, x_part)?;
    let h_part = as_rows(tape, h_part)?;
    let pre = tape.add_bias(tape.add(x_part, h_part)?, p.bias)?;
    let c_prev = as_rows(tape, c_prev)?;
    let rows = tape.shape(x_part)[0];
    if tape.shape(c_prev) != [rows, hidden] {
        return Err(shape_err(
            "lstm_cell_step",
            format!("cell state {:?}, expected [{rows}, {hidden}]", tape.shape(c_prev)),
        ));
    }
    gates(tape, pre, Some(c_prev), hidden)
}

fn as_rows(tape: &Tape, v: Var) -> Result<Var, TensorError> {
    let shape = tape.shape(v);
    if shape.len() == 1 {
        tape.reshape(v, &[1, shape[0]])
    } else {
        Ok(v)
    }
}

/// Runs one direction over a time-major input `[T·B × D]` from zero state and
/// returns the hidden state of every step, in time order.
fn run_direction(
    tape: &Tape,
    p: &LstmParams<Var>,
    xs: Var,
    batch: usize,
    steps: usize,
    reverse: bool,
) -> Result<Vec<Var>, TensorError> {
    let hidden = tape.shape(p.recurrent_weights)[1];
    // input projection for every step in one product
    let proj = tape.add_bias(tape.matmul_nt(xs, p.input_weights)?, p.bias)?;
    let mut out = vec![None; steps];
    let mut state: Option<(Var, Var)> = None;
    let order: Box<dyn Iterator<Item = usize>> = if reverse {
        Box::new((0..steps).rev())
    } else {
        Box::new(0..steps)
    };
    for t in order {
        let mut pre = tape.slice_rows(proj, t * batch, batch)?;
        if let Some((h, _)) = state {
            pre = tape.add(pre, tape.matmul_nt(h, p.recurrent_weights)?)?;
        }
        let (h, c) = gates(tape, pre, state.map(|(_, c)| c), hidden)?;
        out[t] = Some(h);
        state = Some((h, c));
    }
    Ok(out.into_iter().map(|h| h.expect("every step visited")).collect())
}

/// Stacked bidirectional LSTM over a time-major sequence `xs: [T·B × D]`.
///
/// Each layer runs a left-to-right and a right-to-left pass from zero state
/// and concatenates them per step; the next layer consumes the `2H`-wide
/// result. Returns the top layer's `T` outputs, each `[B×2H]`.
/// With `batch = 1` the input is simply `[T×D]`.
pub fn bilstm_forward(
    tape: &Tape,
    layers: &[BiLstmLayer<Var>],
    xs: Var,
    batch: usize,
) -> Result<Vec<Var>, TensorError> {
    let rows = tape.shape(xs)[0];
    if batch == 0 || rows == 0 || !rows.is_multiple_of(batch) {
        return Err(shape_err("bilstm", format!("{rows} rows do not split into batches of {batch}")));
    }
    if layers.is_empty() {
        return Err(shape_err("bilstm", "no layers"));
    }
    let steps = rows / batch;
    let mut input = xs;
    let mut outputs = Vec::new();
    for (l, layer) in layers.iter().enumerate() {
        let fwd = run_direction(tape, &layer.forward, input, batch, steps, false)?;
        let bwd = run_direction(tape, &layer.backward, input, batch, steps, true)?;
        outputs = fwd
            .iter()
            .zip(&bwd)
            .map(|(&f, &b)| tape.concat_cols(&[f, b]))
            .collect::<Result<Vec<_>, _>>()?;
        if l + 1 < layers.len() {
            input = tape.concat_rows(&outputs)?;
        }
    }
    Ok(outputs)
}
