use crate::tensor::{Tape, Tensor, TensorError, Var};

use super::init::{glorot_uniform, ParamRng};

/// Fully connected layer: `weight: [out×in]`, `bias: [out]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseParams<P = Tensor> {
    pub weight: P,
    pub bias: P,
}

impl DenseParams<Tensor> {
    pub fn init(inputs: usize, outputs: usize, rng: &mut ParamRng) -> Self {
        DenseParams {
            weight: glorot_uniform(&[outputs, inputs], inputs, outputs, rng),
            bias: Tensor::zeros(&[outputs]),
        }
    }

    pub fn inputs(&self) -> usize {
        self.weight.shape()[1]
    }

    pub fn outputs(&self) -> usize {
        self.weight.shape()[0]
    }
}

impl<P> DenseParams<P> {
    pub fn map<Q>(&self, f: &mut impl FnMut(&P) -> Q) -> DenseParams<Q> {
        DenseParams {
            weight: f(&self.weight),
            bias: f(&self.bias),
        }
    }

    pub fn leaves(&self) -> Vec<&P> {
        vec![&self.weight, &self.bias]
    }

    pub fn leaves_mut(&mut self) -> Vec<&mut P> {
        vec![&mut self.weight, &mut self.bias]
    }
}

/// `x · weightᵀ + bias` for `x: [in]` or `[B×in]`.
pub fn dense_forward(tape: &Tape, p: &DenseParams<Var>, x: Var) -> Result<Var, TensorError> {
    let y = tape.matmul_nt(x, p.weight)?;
    tape.add_bias(y, p.bias)
}
