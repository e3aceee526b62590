use crate::tensor::{shape_err, Tape, Tensor, TensorError, Var};

use super::init::{glorot_uniform, ParamRng};

/// 1-D convolution weights: `kernel: [C_out×C_in×k]`, `bias: [C_out]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvParams<P = Tensor> {
    pub kernel: P,
    pub bias: P,
}

impl ConvParams<Tensor> {
    pub fn init(in_channels: usize, out_channels: usize, width: usize, rng: &mut ParamRng) -> Self {
        ConvParams {
            kernel: glorot_uniform(
                &[out_channels, in_channels, width],
                in_channels * width,
                out_channels * width,
                rng,
            ),
            bias: Tensor::zeros(&[out_channels]),
        }
    }
}

impl<P> ConvParams<P> {
    pub fn map<Q>(&self, f: &mut impl FnMut(&P) -> Q) -> ConvParams<Q> {
        ConvParams {
            kernel: f(&self.kernel),
            bias: f(&self.bias),
        }
    }

    pub fn leaves(&self) -> Vec<&P> {
        vec![&self.kernel, &self.bias]
    }

    pub fn leaves_mut(&mut self) -> Vec<&mut P> {
        vec![&mut self.kernel, &mut self.bias]
    }
}

pub fn conv_forward(
    tape: &Tape,
    p: &ConvParams<Var>,
    x: Var,
    stride: usize,
    padding: usize,
) -> Result<Var, TensorError> {
    tape.conv1d(x, p.kernel, p.bias, stride, padding)
}

/// Two length-preserving convolutions plus a shortcut.
///
/// `projection` is a 1×1 convolution on the shortcut, present exactly when
/// the block changes the channel count.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualBlockParams<P = Tensor> {
    pub conv1: ConvParams<P>,
    pub conv2: ConvParams<P>,
    pub projection: Option<ConvParams<P>>,
}

impl ResidualBlockParams<Tensor> {
    pub fn init(in_channels: usize, out_channels: usize, width: usize, rng: &mut ParamRng) -> Self {
        assert!(width % 2 == 1, "residual convolutions need an odd kernel width");
        ResidualBlockParams {
            conv1: ConvParams::init(in_channels, out_channels, width, rng),
            conv2: ConvParams::init(out_channels, out_channels, width, rng),
            projection: (in_channels != out_channels)
                .then(|| ConvParams::init(in_channels, out_channels, 1, rng)),
        }
    }
}

impl<P> ResidualBlockParams<P> {
    pub fn map<Q>(&self, f: &mut impl FnMut(&P) -> Q) -> ResidualBlockParams<Q> {
        ResidualBlockParams {
            conv1: self.conv1.map(f),
            conv2: self.conv2.map(f),
            projection: self.projection.as_ref().map(|p| p.map(f)),
        }
    }

    pub fn leaves(&self) -> Vec<&P> {
        let mut out = self.conv1.leaves();
        out.extend(self.conv2.leaves());
        if let Some(p) = &self.projection {
            out.extend(p.leaves());
        }
        out
    }

    pub fn leaves_mut(&mut self) -> Vec<&mut P> {
        let mut out = self.conv1.leaves_mut();
        out.extend(self.conv2.leaves_mut());
        if let Some(p) = &mut self.projection {
            out.extend(p.leaves_mut());
        }
        out
    }
}

/// `relu(conv2(relu(conv1(x))) + skip(x))` on `[C×T]` or `[B×C×T]`.
pub fn residual_block_forward(
    tape: &Tape,
    p: &ResidualBlockParams<Var>,
    x: Var,
) -> Result<Var, TensorError> {
    let width = *tape.shape(p.conv1.kernel).last().unwrap();
    let width2 = *tape.shape(p.conv2.kernel).last().unwrap();
    if width.is_multiple_of(2) || width2.is_multiple_of(2) {
        return Err(shape_err("residual_block", "kernel widths must be odd to preserve length"));
    }
    let h = tape.relu(conv_forward(tape, &p.conv1, x, 1, (width - 1) / 2)?);
    let f = conv_forward(tape, &p.conv2, h, 1, (width2 - 1) / 2)?;
    let skip = match &p.projection {
        Some(proj) => conv_forward(tape, proj, x, 1, 0)?,
        None => x,
    };
    Ok(tape.relu(tape.add(f, skip)?))
}
