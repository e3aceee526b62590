use std::cell::{Ref, RefCell};

use serde::{Deserialize, Serialize};

use super::gemm::{gemm, MatRef};
use super::{shape_err, Real, Tensor, TensorError};

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Sigmoid,
    Tanh,
}

impl Activation {
    pub fn apply(self, x: Real) -> Real {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Sigmoid => sigmoid(x),
            Activation::Tanh => x.tanh(),
        }
    }

    /// Derivative expressed through the activation's output.
    fn derivative_from_output(self, y: Real) -> Real {
        match self {
            // subgradient at 0 is 0
            Activation::Relu => {
                if y > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Sigmoid => y * (1.0 - y),
            Activation::Tanh => 1.0 - y * y,
        }
    }
}

pub(crate) fn sigmoid(x: Real) -> Real {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul { a: usize, b: usize, trans_b: bool },
    Add { a: usize, b: usize },
    Mul { a: usize, b: usize },
    AddBias { input: usize, bias: usize },
    Scale { input: usize, factor: Real },
    Activation { input: usize, kind: Activation },
    Softmax { input: usize },
    Conv1d(ConvOp),
    SliceCols { input: usize, start: usize },
    ConcatCols { inputs: Vec<usize> },
    SliceRows { input: usize, start: usize },
    ConcatRows { inputs: Vec<usize> },
    RowDot { a: usize, b: usize },
    ScaleRows { scale: usize, input: usize },
    ToTimeMajor { input: usize, batch: usize, channels: usize, steps: usize },
    Sum { input: usize },
    Reshape { input: usize },
    CrossEntropy { logits: usize, labels: Vec<usize>, probs: Vec<Real> },
}

#[derive(Debug, Clone, Copy)]
struct ConvOp {
    input: usize,
    kernel: usize,
    bias: usize,
    batch: usize,
    in_channels: usize,
    out_channels: usize,
    width: usize,
    steps: usize,
    out_steps: usize,
    stride: usize,
    padding: usize,
}

#[derive(Debug)]
struct Node {
    shape: Vec<usize>,
    value: Vec<Real>,
    grad: Option<Vec<Real>>,
    op: Op,
    needs_grad: bool,
}

/// Records differentiable operations for one forward/backward pass.
///
/// A tape is single-threaded (`!Sync`); build one per pass.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: RefCell<Vec<Node>>,
}

/// Rows and columns of a tensor viewed as a matrix over its last axis.
fn as_matrix(shape: &[usize]) -> (usize, usize) {
    let cols = *shape.last().expect("non-empty shape");
    (shape.iter().product::<usize>() / cols, cols)
}

impl Tape {
    pub fn new() -> Self {
        Tape::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Trainable input: receives a gradient on [`Tape::backward`].
    pub fn leaf(&self, tensor: Tensor) -> Var {
        self.push_leaf(tensor, true)
    }

    /// Input that never receives a gradient.
    pub fn constant(&self, tensor: Tensor) -> Var {
        self.push_leaf(tensor, false)
    }

    fn push_leaf(&self, tensor: Tensor, needs_grad: bool) -> Var {
        let Tensor { shape, data, .. } = tensor;
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(Node {
            shape,
            value: data,
            grad: None,
            op: Op::Leaf,
            needs_grad,
        });
        Var(nodes.len() - 1)
    }

    fn push(&self, shape: Vec<usize>, value: Vec<Real>, op: Op, inputs: &[usize]) -> Var {
        let mut nodes = self.nodes.borrow_mut();
        let needs_grad = inputs.iter().any(|&i| nodes[i].needs_grad);
        debug_assert_eq!(shape.iter().product::<usize>(), value.len());
        nodes.push(Node {
            shape,
            value,
            grad: None,
            op,
            needs_grad,
        });
        Var(nodes.len() - 1)
    }

    pub fn shape(&self, v: Var) -> Vec<usize> {
        self.nodes.borrow()[v.0].shape.clone()
    }

    /// Borrowed view of a node's values.
    pub fn data(&self, v: Var) -> Ref<'_, [Real]> {
        Ref::map(self.nodes.borrow(), |nodes| nodes[v.0].value.as_slice())
    }

    /// Copy of a node's value, with its gradient attached when one was computed.
    pub fn value(&self, v: Var) -> Tensor {
        let nodes = self.nodes.borrow();
        let node = &nodes[v.0];
        Tensor {
            shape: node.shape.clone(),
            data: node.value.clone(),
            grad: node.grad.clone(),
        }
    }

    /// Gradient of the last backward pass with respect to `v`; zeros if the
    /// loss did not depend on it. Only leaves keep their gradients.
    pub fn grad(&self, v: Var) -> Tensor {
        let nodes = self.nodes.borrow();
        let node = &nodes[v.0];
        let data = node.grad.clone().unwrap_or_else(|| vec![0.0; node.value.len()]);
        Tensor {
            shape: node.shape.clone(),
            data,
            grad: None,
        }
    }

    pub fn zero_grads(&self) {
        for node in self.nodes.borrow_mut().iter_mut() {
            node.grad = None;
        }
    }

    // ---- operations ----

    /// `a · b` for `a: [m×k]` (or a length-`k` vector) and `b: [k×n]`.
    pub fn matmul(&self, a: Var, b: Var) -> Result<Var, TensorError> {
        self.matmul_impl(a, b, false)
    }

    /// `a · bᵀ` for `a: [m×k]` (or a vector) and `b: [n×k]`; the weight layout of
    /// dense and recurrent layers.
    pub fn matmul_nt(&self, a: Var, b: Var) -> Result<Var, TensorError> {
        self.matmul_impl(a, b, true)
    }

    fn matmul_impl(&self, a: Var, b: Var, trans_b: bool) -> Result<Var, TensorError> {
        let (shape, value) = {
            let nodes = self.nodes.borrow();
            let (na, nb) = (&nodes[a.0], &nodes[b.0]);
            if na.shape.len() > 2 || nb.shape.len() != 2 {
                return Err(shape_err(
                    "matmul",
                    format!("expected matrices, got {:?} and {:?}", na.shape, nb.shape),
                ));
            }
            let (m, k) = as_matrix(&na.shape);
            let bm = if trans_b {
                MatRef::new(&nb.value, nb.shape[0], nb.shape[1]).t()
            } else {
                MatRef::new(&nb.value, nb.shape[0], nb.shape[1])
            };
            if bm.rows != k {
                return Err(shape_err(
                    "matmul",
                    format!("inner extents differ: {:?} and {:?}", na.shape, nb.shape),
                ));
            }
            let n = bm.cols;
            let mut out = vec![0.0; m * n];
            gemm(MatRef::new(&na.value, m, k), bm, 0.0, &mut out);
            let shape = if na.shape.len() == 1 { vec![n] } else { vec![m, n] };
            (shape, out)
        };
        Ok(self.push(shape, value, Op::MatMul { a: a.0, b: b.0, trans_b }, &[a.0, b.0]))
    }

    pub fn add(&self, a: Var, b: Var) -> Result<Var, TensorError> {
        let (shape, value) = self.zip_same("add", a, b, |x, y| x + y)?;
        Ok(self.push(shape, value, Op::Add { a: a.0, b: b.0 }, &[a.0, b.0]))
    }

    /// Elementwise product.
    pub fn mul(&self, a: Var, b: Var) -> Result<Var, TensorError> {
        let (shape, value) = self.zip_same("mul", a, b, |x, y| x * y)?;
        Ok(self.push(shape, value, Op::Mul { a: a.0, b: b.0 }, &[a.0, b.0]))
    }

    fn zip_same(
        &self,
        op: &'static str,
        a: Var,
        b: Var,
        f: impl Fn(Real, Real) -> Real,
    ) -> Result<(Vec<usize>, Vec<Real>), TensorError> {
        let nodes = self.nodes.borrow();
        let (na, nb) = (&nodes[a.0], &nodes[b.0]);
        if na.shape != nb.shape {
            return Err(shape_err(op, format!("{:?} vs {:?}", na.shape, nb.shape)));
        }
        let value = na.value.iter().zip(&nb.value).map(|(&x, &y)| f(x, y)).collect();
        Ok((na.shape.clone(), value))
    }

    /// Adds a length-`n` bias to every row of a tensor whose last axis is `n`.
    pub fn add_bias(&self, input: Var, bias: Var) -> Result<Var, TensorError> {
        let (shape, value) = {
            let nodes = self.nodes.borrow();
            let (ni, nb) = (&nodes[input.0], &nodes[bias.0]);
            let (_, cols) = as_matrix(&ni.shape);
            if nb.shape != [cols] {
                return Err(shape_err(
                    "add_bias",
                    format!("bias {:?} does not match last axis of {:?}", nb.shape, ni.shape),
                ));
            }
            let mut value = ni.value.clone();
            for row in value.chunks_exact_mut(cols) {
                row.iter_mut().zip(&nb.value).for_each(|(v, b)| *v += b);
            }
            (ni.shape.clone(), value)
        };
        Ok(self.push(shape, value, Op::AddBias { input: input.0, bias: bias.0 }, &[input.0, bias.0]))
    }

    pub fn scale(&self, input: Var, factor: Real) -> Var {
        let (shape, value) = {
            let nodes = self.nodes.borrow();
            let n = &nodes[input.0];
            (n.shape.clone(), n.value.iter().map(|v| v * factor).collect())
        };
        self.push(shape, value, Op::Scale { input: input.0, factor }, &[input.0])
    }

    pub fn activation(&self, input: Var, kind: Activation) -> Var {
        let (shape, value) = {
            let nodes = self.nodes.borrow();
            let n = &nodes[input.0];
            (n.shape.clone(), n.value.iter().map(|&v| kind.apply(v)).collect())
        };
        self.push(shape, value, Op::Activation { input: input.0, kind }, &[input.0])
    }

    pub fn relu(&self, input: Var) -> Var {
        self.activation(input, Activation::Relu)
    }

    pub fn sigmoid(&self, input: Var) -> Var {
        self.activation(input, Activation::Sigmoid)
    }

    pub fn tanh(&self, input: Var) -> Var {
        self.activation(input, Activation::Tanh)
    }

    /// Softmax along the last axis, max-subtracted.
    pub fn softmax(&self, input: Var) -> Var {
        let (shape, value) = {
            let nodes = self.nodes.borrow();
            let n = &nodes[input.0];
            let (_, cols) = as_matrix(&n.shape);
            let mut value = n.value.clone();
            value.chunks_exact_mut(cols).for_each(softmax_in_place);
            (n.shape.clone(), value)
        };
        self.push(shape, value, Op::Softmax { input: input.0 }, &[input.0])
    }

    /// 1-D cross-correlation over the time axis.
    ///
    /// `input` is `[C_in×T]` or batched `[B×C_in×T]`, `kernel` is
    /// `[C_out×C_in×k]`, `bias` is `[C_out]`. The output keeps the input's rank.
    pub fn conv1d(
        &self,
        input: Var,
        kernel: Var,
        bias: Var,
        stride: usize,
        padding: usize,
    ) -> Result<Var, TensorError> {
        let (shape, value, op) = {
            let nodes = self.nodes.borrow();
            let (ni, nk, nb) = (&nodes[input.0], &nodes[kernel.0], &nodes[bias.0]);
            let (batch, in_channels, steps) = match ni.shape[..] {
                [c, t] => (1, c, t),
                [b, c, t] => (b, c, t),
                _ => return Err(shape_err("conv1d", format!("input must be 2-D or 3-D, got {:?}", ni.shape))),
            };
            let [out_channels, k_in, width] = nk.shape[..] else {
                return Err(shape_err("conv1d", format!("kernel must be 3-D, got {:?}", nk.shape)));
            };
            if k_in != in_channels {
                return Err(shape_err(
                    "conv1d",
                    format!("kernel expects {k_in} input channels, input has {in_channels}"),
                ));
            }
            if nb.shape != [out_channels] {
                return Err(shape_err("conv1d", format!("bias {:?} for {out_channels} channels", nb.shape)));
            }
            if stride == 0 {
                return Err(shape_err("conv1d", "stride must be positive"));
            }
            if width > steps + 2 * padding {
                return Err(shape_err(
                    "conv1d",
                    format!("kernel width {width} exceeds padded length {}", steps + 2 * padding),
                ));
            }
            let out_steps = (steps + 2 * padding - width) / stride + 1;
            let op = ConvOp {
                input: input.0,
                kernel: kernel.0,
                bias: bias.0,
                batch,
                in_channels,
                out_channels,
                width,
                steps,
                out_steps,
                stride,
                padding,
            };
            let value = conv_forward(&op, &ni.value, &nk.value, &nb.value);
            let shape = if ni.shape.len() == 2 {
                vec![out_channels, out_steps]
            } else {
                vec![batch, out_channels, out_steps]
            };
            (shape, value, op)
        };
        Ok(self.push(shape, value, Op::Conv1d(op), &[input.0, kernel.0, bias.0]))
    }

    /// Columns `start..start + len` of a matrix-shaped tensor.
    pub fn slice_cols(&self, input: Var, start: usize, len: usize) -> Result<Var, TensorError> {
        let (shape, value) = {
            let nodes = self.nodes.borrow();
            let n = &nodes[input.0];
            let (rows, cols) = as_matrix(&n.shape);
            if len == 0 || start + len > cols {
                return Err(shape_err("slice_cols", format!("{start}+{len} outside {cols} columns")));
            }
            let value = n
                .value
                .chunks_exact(cols)
                .flat_map(|row| row[start..start + len].iter().copied())
                .collect();
            (vec![rows, len], value)
        };
        Ok(self.push(shape, value, Op::SliceCols { input: input.0, start }, &[input.0]))
    }

    pub fn concat_cols(&self, inputs: &[Var]) -> Result<Var, TensorError> {
        let (shape, value) = {
            let nodes = self.nodes.borrow();
            let Some(first) = inputs.first() else {
                return Err(shape_err("concat_cols", "no inputs"));
            };
            let (rows, _) = as_matrix(&nodes[first.0].shape);
            let mut total = 0;
            for v in inputs {
                let (r, c) = as_matrix(&nodes[v.0].shape);
                if r != rows {
                    return Err(shape_err("concat_cols", format!("row counts {rows} and {r} differ")));
                }
                total += c;
            }
            let mut value = Vec::with_capacity(rows * total);
            for r in 0..rows {
                for v in inputs {
                    let n = &nodes[v.0];
                    let c = *n.shape.last().unwrap();
                    value.extend_from_slice(&n.value[r * c..(r + 1) * c]);
                }
            }
            (vec![rows, total], value)
        };
        let ids: Vec<usize> = inputs.iter().map(|v| v.0).collect();
        Ok(self.push(shape, value, Op::ConcatCols { inputs: ids.clone() }, &ids))
    }

    /// Rows `start..start + len` of a matrix-shaped tensor.
    pub fn slice_rows(&self, input: Var, start: usize, len: usize) -> Result<Var, TensorError> {
        let (shape, value) = {
            let nodes = self.nodes.borrow();
            let n = &nodes[input.0];
            let (rows, cols) = as_matrix(&n.shape);
            if len == 0 || start + len > rows {
                return Err(shape_err("slice_rows", format!("{start}+{len} outside {rows} rows")));
            }
            (vec![len, cols], n.value[start * cols..(start + len) * cols].to_vec())
        };
        Ok(self.push(shape, value, Op::SliceRows { input: input.0, start }, &[input.0]))
    }

    pub fn concat_rows(&self, inputs: &[Var]) -> Result<Var, TensorError> {
        let (shape, value) = {
            let nodes = self.nodes.borrow();
            let Some(first) = inputs.first() else {
                return Err(shape_err("concat_rows", "no inputs"));
            };
            let (_, cols) = as_matrix(&nodes[first.0].shape);
            let mut value = Vec::new();
            for v in inputs {
                let n = &nodes[v.0];
                let (_, c) = as_matrix(&n.shape);
                if c != cols {
                    return Err(shape_err("concat_rows", format!("column counts {cols} and {c} differ")));
                }
                value.extend_from_slice(&n.value);
            }
            (vec![value.len() / cols, cols], value)
        };
        let ids: Vec<usize> = inputs.iter().map(|v| v.0).collect();
        Ok(self.push(shape, value, Op::ConcatRows { inputs: ids.clone() }, &ids))
    }

    /// Per-row dot product of two `[B×n]` tensors, giving `[B×1]`.
    pub fn row_dot(&self, a: Var, b: Var) -> Result<Var, TensorError> {
        let (shape, value) = {
            let nodes = self.nodes.borrow();
            let (na, nb) = (&nodes[a.0], &nodes[b.0]);
            if na.shape != nb.shape {
                return Err(shape_err("row_dot", format!("{:?} vs {:?}", na.shape, nb.shape)));
            }
            let (rows, cols) = as_matrix(&na.shape);
            let value = na
                .value
                .chunks_exact(cols)
                .zip(nb.value.chunks_exact(cols))
                .map(|(x, y)| x.iter().zip(y).map(|(p, q)| p * q).sum())
                .collect();
            (vec![rows, 1], value)
        };
        Ok(self.push(shape, value, Op::RowDot { a: a.0, b: b.0 }, &[a.0, b.0]))
    }

    /// Multiplies row `r` of `input: [B×n]` by `scale[r]`, with `scale: [B×1]`.
    pub fn scale_rows(&self, scale: Var, input: Var) -> Result<Var, TensorError> {
        let (shape, value) = {
            let nodes = self.nodes.borrow();
            let (ns, ni) = (&nodes[scale.0], &nodes[input.0]);
            let (rows, cols) = as_matrix(&ni.shape);
            if ns.value.len() != rows {
                return Err(shape_err(
                    "scale_rows",
                    format!("scale {:?} for {rows} rows", ns.shape),
                ));
            }
            let value = ni
                .value
                .chunks_exact(cols)
                .zip(&ns.value)
                .flat_map(|(row, &s)| row.iter().map(move |v| v * s))
                .collect();
            (vec![rows, cols], value)
        };
        Ok(self.push(shape, value, Op::ScaleRows { scale: scale.0, input: input.0 }, &[scale.0, input.0]))
    }

    /// `[B×C×T]` to `[T·B × C]`: row `t·B + b` holds the channel vector of
    /// batch item `b` at step `t`.
    pub fn to_time_major(&self, input: Var) -> Result<Var, TensorError> {
        let (shape, value, op) = {
            let nodes = self.nodes.borrow();
            let n = &nodes[input.0];
            let [batch, channels, steps] = n.shape[..] else {
                return Err(shape_err("to_time_major", format!("expected [B×C×T], got {:?}", n.shape)));
            };
            let mut value = vec![0.0; n.value.len()];
            for b in 0..batch {
                for c in 0..channels {
                    let src = &n.value[(b * channels + c) * steps..][..steps];
                    for (t, &x) in src.iter().enumerate() {
                        value[(t * batch + b) * channels + c] = x;
                    }
                }
            }
            (
                vec![steps * batch, channels],
                value,
                Op::ToTimeMajor { input: input.0, batch, channels, steps },
            )
        };
        Ok(self.push(shape, value, op, &[input.0]))
    }

    /// Sum of all elements, as a `[1]` tensor.
    pub fn sum(&self, input: Var) -> Var {
        let value = self.nodes.borrow()[input.0].value.iter().sum();
        self.push(vec![1], vec![value], Op::Sum { input: input.0 }, &[input.0])
    }

    pub fn reshape(&self, input: Var, shape: &[usize]) -> Result<Var, TensorError> {
        let value = {
            let nodes = self.nodes.borrow();
            let n = &nodes[input.0];
            if shape.is_empty() || shape.contains(&0) || shape.iter().product::<usize>() != n.value.len() {
                return Err(shape_err("reshape", format!("{:?} to {shape:?}", n.shape)));
            }
            n.value.clone()
        };
        Ok(self.push(shape.to_vec(), value, Op::Reshape { input: input.0 }, &[input.0]))
    }

    /// Mean over rows of `−log softmax(logits)[label]`, fused for stability.
    /// `logits` is `[K]` (one label) or `[B×K]` (one label per row).
    pub fn cross_entropy(&self, logits: Var, labels: &[usize]) -> Result<Var, TensorError> {
        let (loss, probs) = {
            let nodes = self.nodes.borrow();
            let n = &nodes[logits.0];
            let (rows, classes) = as_matrix(&n.shape);
            if labels.len() != rows {
                return Err(shape_err(
                    "cross_entropy",
                    format!("{} labels for {rows} rows", labels.len()),
                ));
            }
            if let Some(&label) = labels.iter().find(|&&l| l >= classes) {
                return Err(TensorError::LabelOutOfRange { label, classes });
            }
            let mut probs = n.value.clone();
            let mut loss = 0.0;
            for (row, &label) in probs.chunks_exact_mut(classes).zip(labels) {
                let max = row.iter().copied().fold(Real::NEG_INFINITY, Real::max);
                let log_sum = row.iter().map(|v| (v - max).exp()).sum::<Real>().ln();
                loss += log_sum - (row[label] - max);
                row.iter_mut().for_each(|v| *v = (*v - max - log_sum).exp());
            }
            (loss / rows as Real, probs)
        };
        Ok(self.push(
            vec![1],
            vec![loss],
            Op::CrossEntropy { logits: logits.0, labels: labels.to_vec(), probs },
            &[logits.0],
        ))
    }

    // ---- reverse pass ----

    /// Populates gradients of `loss` with respect to every leaf.
    ///
    /// Previous gradients are cleared first, so running backward twice from the
    /// same graph gives identical results. Intermediate gradients are dropped
    /// once propagated.
    pub fn backward(&self, loss: Var) -> Result<(), TensorError> {
        let mut nodes = self.nodes.borrow_mut();
        if nodes[loss.0].value.len() != 1 {
            return Err(TensorError::NonScalarLoss(nodes[loss.0].shape.clone()));
        }
        nodes.iter_mut().for_each(|n| n.grad = None);
        if !nodes[loss.0].needs_grad {
            return Ok(());
        }
        nodes[loss.0].grad = Some(vec![1.0]);
        for i in (0..=loss.0).rev() {
            let (before, rest) = nodes.split_at_mut(i);
            let node = &mut rest[0];
            if matches!(node.op, Op::Leaf) || !node.needs_grad {
                continue;
            }
            let Some(g) = node.grad.take() else { continue };
            propagate(node, &g, before);
        }
        Ok(())
    }
}

fn softmax_in_place(row: &mut [Real]) {
    let max = row.iter().copied().fold(Real::NEG_INFINITY, Real::max);
    let mut total = 0.0;
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        total += *v;
    }
    row.iter_mut().for_each(|v| *v /= total);
}

fn im2col(op: &ConvOp, x: &[Real], col: &mut [Real]) {
    let ConvOp { in_channels, width, steps, out_steps, stride, padding, .. } = *op;
    for c in 0..in_channels {
        let xc = &x[c * steps..(c + 1) * steps];
        for j in 0..width {
            let dst = &mut col[(c * width + j) * out_steps..][..out_steps];
            for (t, d) in dst.iter_mut().enumerate() {
                let pos = (t * stride + j) as isize - padding as isize;
                *d = if pos >= 0 && (pos as usize) < steps { xc[pos as usize] } else { 0.0 };
            }
        }
    }
}

fn col2im_add(op: &ConvOp, col: &[Real], dx: &mut [Real]) {
    let ConvOp { in_channels, width, steps, out_steps, stride, padding, .. } = *op;
    for c in 0..in_channels {
        let dxc = &mut dx[c * steps..(c + 1) * steps];
        for j in 0..width {
            let src = &col[(c * width + j) * out_steps..][..out_steps];
            for (t, &g) in src.iter().enumerate() {
                let pos = (t * stride + j) as isize - padding as isize;
                if pos >= 0 && (pos as usize) < steps {
                    dxc[pos as usize] += g;
                }
            }
        }
    }
}

fn conv_forward(op: &ConvOp, x: &[Real], kernel: &[Real], bias: &[Real]) -> Vec<Real> {
    let rows = op.in_channels * op.width;
    let mut col = vec![0.0; rows * op.out_steps];
    let out_len = op.out_channels * op.out_steps;
    let mut out = vec![0.0; op.batch * out_len];
    let kmat = MatRef::new(kernel, op.out_channels, rows);
    for b in 0..op.batch {
        im2col(op, &x[b * op.in_channels * op.steps..][..op.in_channels * op.steps], &mut col);
        let ob = &mut out[b * out_len..][..out_len];
        for (c, row) in ob.chunks_exact_mut(op.out_steps).enumerate() {
            row.fill(bias[c]);
        }
        gemm(kmat, MatRef::new(&col, rows, op.out_steps), 1.0, ob);
    }
    out
}

/// Adds `contrib` into the gradient of `node`, moving it in when empty.
fn accumulate(node: &mut Node, contrib: Vec<Real>) {
    if !node.needs_grad {
        return;
    }
    match &mut node.grad {
        Some(g) => g.iter_mut().zip(&contrib).for_each(|(a, b)| *a += b),
        None => node.grad = Some(contrib),
    }
}

fn grad_mut(node: &mut Node) -> &mut Vec<Real> {
    let len = node.value.len();
    node.grad.get_or_insert_with(|| vec![0.0; len])
}

fn propagate(node: &Node, g: &[Real], before: &mut [Node]) {
    match &node.op {
        Op::Leaf => {}
        &Op::MatMul { a, b, trans_b } => {
            let (m, k) = as_matrix(&before[a].shape);
            let (br, bc) = (before[b].shape[0], before[b].shape[1]);
            let n = if trans_b { br } else { bc };
            let gm = MatRef::new(g, m, n);
            if before[a].needs_grad {
                let bm = MatRef::new(&before[b].value, br, bc);
                // dA = G · Bᵀ where B is the effective right operand
                let bt = if trans_b { bm } else { bm.t() };
                let mut da = vec![0.0; m * k];
                gemm(gm, bt, 0.0, &mut da);
                accumulate(&mut before[a], da);
            }
            if before[b].needs_grad {
                let am = MatRef::new(&before[a].value, m, k);
                let mut db = vec![0.0; br * bc];
                if trans_b {
                    gemm(gm.t(), am, 0.0, &mut db);
                } else {
                    gemm(am.t(), gm, 0.0, &mut db);
                }
                accumulate(&mut before[b], db);
            }
        }
        &Op::Add { a, b } => {
            accumulate(&mut before[a], g.to_vec());
            accumulate(&mut before[b], g.to_vec());
        }
        &Op::Mul { a, b } => {
            if before[a].needs_grad {
                let da = g.iter().zip(&before[b].value).map(|(g, y)| g * y).collect();
                accumulate(&mut before[a], da);
            }
            if before[b].needs_grad {
                let db = g.iter().zip(&before[a].value).map(|(g, x)| g * x).collect();
                accumulate(&mut before[b], db);
            }
        }
        &Op::AddBias { input, bias } => {
            accumulate(&mut before[input], g.to_vec());
            if before[bias].needs_grad {
                let cols = before[bias].value.len();
                let gb = grad_mut(&mut before[bias]);
                for row in g.chunks_exact(cols) {
                    gb.iter_mut().zip(row).for_each(|(a, b)| *a += b);
                }
            }
        }
        &Op::Scale { input, factor } => {
            accumulate(&mut before[input], g.iter().map(|v| v * factor).collect());
        }
        &Op::Activation { input, kind } => {
            let dx = g
                .iter()
                .zip(&node.value)
                .map(|(g, &y)| g * kind.derivative_from_output(y))
                .collect();
            accumulate(&mut before[input], dx);
        }
        &Op::Softmax { input } => {
            let (_, cols) = as_matrix(&node.shape);
            let mut dx = Vec::with_capacity(g.len());
            for (gr, yr) in g.chunks_exact(cols).zip(node.value.chunks_exact(cols)) {
                let dot: Real = gr.iter().zip(yr).map(|(a, b)| a * b).sum();
                dx.extend(gr.iter().zip(yr).map(|(g, y)| y * (g - dot)));
            }
            accumulate(&mut before[input], dx);
        }
        Op::Conv1d(op) => conv_backward(op, g, before),
        &Op::SliceCols { input, start } => {
            if before[input].needs_grad {
                let cols = *before[input].shape.last().unwrap();
                let len = node.shape[1];
                let gi = grad_mut(&mut before[input]);
                for (dst, src) in gi.chunks_exact_mut(cols).zip(g.chunks_exact(len)) {
                    dst[start..start + len].iter_mut().zip(src).for_each(|(a, b)| *a += b);
                }
            }
        }
        Op::ConcatCols { inputs } => {
            let total = node.shape[1];
            let mut offset = 0;
            for &id in inputs {
                let cols = *before[id].shape.last().unwrap();
                if before[id].needs_grad {
                    let gi = grad_mut(&mut before[id]);
                    for (dst, src) in gi.chunks_exact_mut(cols).zip(g.chunks_exact(total)) {
                        dst.iter_mut().zip(&src[offset..offset + cols]).for_each(|(a, b)| *a += b);
                    }
                }
                offset += cols;
            }
        }
        &Op::SliceRows { input, start } => {
            if before[input].needs_grad {
                let cols = node.shape[1];
                let gi = grad_mut(&mut before[input]);
                gi[start * cols..start * cols + g.len()]
                    .iter_mut()
                    .zip(g)
                    .for_each(|(a, b)| *a += b);
            }
        }
        Op::ConcatRows { inputs } => {
            let mut offset = 0;
            for &id in inputs {
                let len = before[id].value.len();
                accumulate(&mut before[id], g[offset..offset + len].to_vec());
                offset += len;
            }
        }
        &Op::RowDot { a, b } => {
            let cols = *before[a].shape.last().unwrap();
            if before[a].needs_grad {
                let da = before[b]
                    .value
                    .chunks_exact(cols)
                    .zip(g)
                    .flat_map(|(row, &s)| row.iter().map(move |v| v * s))
                    .collect();
                accumulate(&mut before[a], da);
            }
            if before[b].needs_grad {
                let db = before[a]
                    .value
                    .chunks_exact(cols)
                    .zip(g)
                    .flat_map(|(row, &s)| row.iter().map(move |v| v * s))
                    .collect();
                accumulate(&mut before[b], db);
            }
        }
        &Op::ScaleRows { scale, input } => {
            let cols = node.shape[1];
            if before[scale].needs_grad {
                let ds = before[input]
                    .value
                    .chunks_exact(cols)
                    .zip(g.chunks_exact(cols))
                    .map(|(x, g)| x.iter().zip(g).map(|(a, b)| a * b).sum())
                    .collect();
                accumulate(&mut before[scale], ds);
            }
            if before[input].needs_grad {
                let dx = g
                    .chunks_exact(cols)
                    .zip(&before[scale].value)
                    .flat_map(|(row, &s)| row.iter().map(move |v| v * s))
                    .collect();
                accumulate(&mut before[input], dx);
            }
        }
        &Op::ToTimeMajor { input, batch, channels, steps } => {
            if before[input].needs_grad {
                let gi = grad_mut(&mut before[input]);
                for b in 0..batch {
                    for c in 0..channels {
                        let dst = &mut gi[(b * channels + c) * steps..][..steps];
                        for (t, d) in dst.iter_mut().enumerate() {
                            *d += g[(t * batch + b) * channels + c];
                        }
                    }
                }
            }
        }
        &Op::Sum { input } => {
            let len = before[input].value.len();
            accumulate(&mut before[input], vec![g[0]; len]);
        }
        &Op::Reshape { input } => accumulate(&mut before[input], g.to_vec()),
        Op::CrossEntropy { logits, labels, probs } => {
            let classes = *before[*logits].shape.last().unwrap();
            let scale = g[0] / labels.len() as Real;
            let mut dx = probs.clone();
            for (row, &label) in dx.chunks_exact_mut(classes).zip(labels) {
                row[label] -= 1.0;
                row.iter_mut().for_each(|v| *v *= scale);
            }
            accumulate(&mut before[*logits], dx);
        }
    }
}

fn conv_backward(op: &ConvOp, g: &[Real], before: &mut [Node]) {
    let rows = op.in_channels * op.width;
    let in_len = op.in_channels * op.steps;
    let out_len = op.out_channels * op.out_steps;
    let mut col = vec![0.0; rows * op.out_steps];
    let mut dkernel = before[op.kernel].needs_grad.then(|| vec![0.0; op.out_channels * rows]);
    let mut dinput = before[op.input].needs_grad.then(|| vec![0.0; op.batch * in_len]);
    let mut dcol = vec![0.0; rows * op.out_steps];
    for b in 0..op.batch {
        let gb = MatRef::new(&g[b * out_len..][..out_len], op.out_channels, op.out_steps);
        if let Some(dk) = dkernel.as_mut() {
            im2col(op, &before[op.input].value[b * in_len..][..in_len], &mut col);
            gemm(gb, MatRef::new(&col, rows, op.out_steps).t(), 1.0, dk);
        }
        if let Some(dx) = dinput.as_mut() {
            let kmat = MatRef::new(&before[op.kernel].value, op.out_channels, rows);
            gemm(kmat.t(), gb, 0.0, &mut dcol);
            col2im_add(op, &dcol, &mut dx[b * in_len..][..in_len]);
        }
    }
    if before[op.bias].needs_grad {
        let mut dbias = vec![0.0; op.out_channels];
        for gb in g.chunks_exact(out_len) {
            for (c, row) in gb.chunks_exact(op.out_steps).enumerate() {
                dbias[c] += row.iter().sum::<Real>();
            }
        }
        accumulate(&mut before[op.bias], dbias);
    }
    if let Some(dk) = dkernel {
        accumulate(&mut before[op.kernel], dk);
    }
    if let Some(dx) = dinput {
        accumulate(&mut before[op.input], dx);
    }
}
