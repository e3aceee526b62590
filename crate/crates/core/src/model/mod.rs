//! The full classifier.
//!
//! ```text
//! [B×2×L] frames
//!   → residual blocks (2 → C → C channels, length preserved)
//!   → conv(k, stride s) + relu            (dimension reduction)
//!   → time-major sequence [T·B × C]
//!   → stacked bidirectional LSTM          (T outputs of [B×2H])
//!   → attention pooling                   (query = dense(last output))
//!   → dense + relu, dense + relu, dense   (logits [B×K])
//!   → softmax
//! ```

mod config;
mod io;

pub use config::ModelConfig;
pub use io::{load_model, load_params, save_params, PARAMS_MAGIC, PARAMS_VERSION};

use crate::data::IqFrame;
use crate::nn::{
    attention_pool, bilstm_forward, conv_forward, dense_forward, residual_block_forward, AttentionParams,
    BiLstmLayer, ConvParams, DenseParams, ParamRng, ResidualBlockParams,
};
use crate::tensor::{Real, Tape, Tensor, TensorError, Var};

#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error("invalid config field `{field}`: {reason}")]
    Config { field: &'static str, reason: String },
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error("frame does not fit the model: {0}")]
    Frame(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("not a parameter file (magic {0:?})")]
    BadMagic([u8; 4]),
    #[error("unsupported parameter file version {0}")]
    Version(u32),
    #[error("parameter file integrity: {0}")]
    Integrity(String),
    #[error("parameter shape mismatch: {0}")]
    ShapeMismatch(String),
}

/// Every trainable tensor of the classifier, in build order.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams<P = Tensor> {
    pub blocks: Vec<ResidualBlockParams<P>>,
    pub reduce: ConvParams<P>,
    pub lstm: Vec<BiLstmLayer<P>>,
    pub attention: AttentionParams<P>,
    pub dense: Vec<DenseParams<P>>,
}

impl<P> ModelParams<P> {
    pub fn map<Q>(&self, mut f: impl FnMut(&P) -> Q) -> ModelParams<Q> {
        ModelParams {
            blocks: self.blocks.iter().map(|b| b.map(&mut f)).collect(),
            reduce: self.reduce.map(&mut f),
            lstm: self.lstm.iter().map(|l| l.map(&mut f)).collect(),
            attention: self.attention.map(&mut f),
            dense: self.dense.iter().map(|d| d.map(&mut f)).collect(),
        }
    }

    pub fn leaves(&self) -> Vec<&P> {
        let mut out: Vec<&P> = self.blocks.iter().flat_map(|b| b.leaves()).collect();
        out.extend(self.reduce.leaves());
        out.extend(self.lstm.iter().flat_map(|l| l.leaves()));
        out.extend(self.attention.leaves());
        out.extend(self.dense.iter().flat_map(|d| d.leaves()));
        out
    }

    pub fn leaves_mut(&mut self) -> Vec<&mut P> {
        let mut out: Vec<&mut P> = self.blocks.iter_mut().flat_map(|b| b.leaves_mut()).collect();
        out.extend(self.reduce.leaves_mut());
        out.extend(self.lstm.iter_mut().flat_map(|l| l.leaves_mut()));
        out.extend(self.attention.leaves_mut());
        out.extend(self.dense.iter_mut().flat_map(|d| d.leaves_mut()));
        out
    }
}

impl ModelParams<Tensor> {
    /// Seeded initialization for `cfg`. Same config, same parameters.
    pub fn init(cfg: &ModelConfig) -> Result<Self, ModelError> {
        cfg.validate()?;
        let mut rng = ParamRng::new(cfg.seed);
        let c = cfg.residual_channels;
        let blocks = (0..cfg.residual_blocks)
            .map(|b| {
                let inputs = if b == 0 { cfg.in_channels } else { c };
                ResidualBlockParams::init(inputs, c, cfg.residual_kernel, &mut rng)
            })
            .collect();
        let reduce = ConvParams::init(c, c, cfg.reduce_kernel, &mut rng);
        let h = cfg.lstm_hidden;
        let lstm = (0..cfg.lstm_layers)
            .map(|l| BiLstmLayer::init(if l == 0 { c } else { 2 * h }, h, &mut rng))
            .collect();
        let attention = AttentionParams::init(2 * h, &mut rng);
        let mut widths = vec![2 * h];
        widths.extend(&cfg.dense_sizes);
        widths.push(cfg.num_classes);
        let dense = widths
            .windows(2)
            .map(|w| DenseParams::init(w[0], w[1], &mut rng))
            .collect();
        Ok(ModelParams {
            blocks,
            reduce,
            lstm,
            attention,
            dense,
        })
    }

    pub fn count(&self) -> usize {
        self.leaves().iter().map(|t| t.len()).sum()
    }

    pub fn zeros_like(&self) -> Self {
        self.map(|t| Tensor::zeros(t.shape()))
    }

    pub fn is_finite(&self) -> bool {
        self.leaves().iter().all(|t| t.is_finite())
    }
}

/// Graph handles of one forward pass.
#[derive(Debug, Clone, Copy)]
pub struct ForwardVars {
    /// `[B×K]`
    pub logits: Var,
    /// `[B×T]` attention weights over LSTM steps.
    pub attention: Var,
}

/// A configured classifier with its weights.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub config: ModelConfig,
    pub params: ModelParams,
}

impl Model {
    pub fn new(config: ModelConfig) -> Result<Self, ModelError> {
        let params = ModelParams::init(&config)?;
        Ok(Model { config, params })
    }

    pub fn param_count(&self) -> usize {
        self.params.count()
    }

    /// Places every parameter on `tape` as a trainable leaf.
    pub fn bind(&self, tape: &Tape) -> ModelParams<Var> {
        self.params.map(|t| tape.leaf(t.clone()))
    }

    /// `[B×2×L]` input tensor, I row then Q row per frame.
    pub fn input_tensor(&self, frames: &[IqFrame]) -> Result<Tensor, ModelError> {
        let len = self.config.frame_length;
        if frames.is_empty() {
            return Err(ModelError::Frame("empty batch".into()));
        }
        let mut data = Vec::with_capacity(frames.len() * 2 * len);
        for f in frames {
            if f.i.len() != len || f.q.len() != len {
                return Err(ModelError::Frame(format!(
                    "frame has {}/{} samples, model expects {len}",
                    f.i.len(),
                    f.q.len()
                )));
            }
            data.extend(f.i.iter().chain(&f.q).map(|&v| v as Real));
        }
        Ok(Tensor::new(&[frames.len(), 2, len], data)?)
    }

    /// Builds the forward graph for a batch on `tape` using bound parameters.
    pub fn forward_graph(
        &self,
        tape: &Tape,
        p: &ModelParams<Var>,
        frames: &[IqFrame],
    ) -> Result<ForwardVars, ModelError> {
        let cfg = &self.config;
        let x = tape.constant(self.input_tensor(frames)?);
        let mut h = x;
        for block in &p.blocks {
            h = residual_block_forward(tape, block, h)?;
        }
        h = tape.relu(conv_forward(tape, &p.reduce, h, cfg.reduce_stride, cfg.reduce_padding())?);
        let seq = tape.to_time_major(h)?;
        let hiddens = bilstm_forward(tape, &p.lstm, seq, frames.len())?;
        let (context, attention) = attention_pool(tape, &p.attention, &hiddens, cfg.scaled_attention)?;
        let mut z = context;
        let last = p.dense.len() - 1;
        for (n, layer) in p.dense.iter().enumerate() {
            z = dense_forward(tape, layer, z)?;
            if n < last {
                z = tape.relu(z);
            }
        }
        Ok(ForwardVars { logits: z, attention })
    }

    /// Class probabilities for every frame of a batch.
    pub fn forward_batch(&self, frames: &[IqFrame]) -> Result<Vec<Vec<Real>>, ModelError> {
        let tape = Tape::new();
        let p = self.params.map(|t| tape.constant(t.clone()));
        let out = self.forward_graph(&tape, &p, frames)?;
        let probs = tape.softmax(out.logits);
        let k = self.config.num_classes;
        let data = tape.data(probs);
        Ok(data.chunks_exact(k).map(<[Real]>::to_vec).collect())
    }

    /// Class probabilities for one frame.
    pub fn forward(&self, frame: &IqFrame) -> Result<Vec<Real>, ModelError> {
        Ok(self.forward_batch(std::slice::from_ref(frame))?.remove(0))
    }

    pub fn predict(&self, frame: &IqFrame) -> Result<usize, ModelError> {
        Ok(argmax(&self.forward(frame)?))
    }

    pub fn predict_batch(&self, frames: &[IqFrame]) -> Result<Vec<usize>, ModelError> {
        Ok(self.forward_batch(frames)?.iter().map(|p| argmax(p)).collect())
    }

    /// Mean cross-entropy over a batch together with its parameter gradients.
    pub fn loss_and_grads(&self, frames: &[IqFrame]) -> Result<(Real, ModelParams, Vec<usize>), ModelError> {
        let tape = Tape::new();
        let p = self.bind(&tape);
        let out = self.forward_graph(&tape, &p, frames)?;
        let labels: Vec<usize> = frames.iter().map(|f| f.class_index).collect();
        let loss = tape.cross_entropy(out.logits, &labels)?;
        tape.backward(loss)?;
        let value = tape.data(loss)[0];
        let k = self.config.num_classes;
        let predictions = tape.data(out.logits).chunks_exact(k).map(argmax).collect();
        Ok((value, p.map(|&v| tape.grad(v)), predictions))
    }

    /// Mean cross-entropy of a batch without building gradients.
    pub fn loss(&self, frames: &[IqFrame]) -> Result<Real, ModelError> {
        let tape = Tape::new();
        let p = self.params.map(|t| tape.constant(t.clone()));
        let out = self.forward_graph(&tape, &p, frames)?;
        let labels: Vec<usize> = frames.iter().map(|f| f.class_index).collect();
        let loss = tape.cross_entropy(out.logits, &labels)?;
        let value = tape.data(loss)[0];
        Ok(value)
    }

    /// Largest relative error between backpropagated and central-difference
    /// gradients of the batch loss, over every parameter coordinate.
    pub fn gradient_check(&self, frames: &[IqFrame], eps: Real) -> Result<Real, ModelError> {
        let (_, grads, _) = self.loss_and_grads(frames)?;
        let analytic: Vec<Real> = grads.leaves().iter().flat_map(|t| t.data().to_vec()).collect();
        let mut probe = self.clone();
        let mut worst: Real = 0.0;
        let mut flat = 0;
        let sizes: Vec<usize> = self.params.leaves().iter().map(|t| t.len()).collect();
        for (leaf, size) in sizes.into_iter().enumerate() {
            for i in 0..size {
                let original = self.params.leaves()[leaf].data()[i];
                probe.params.leaves_mut()[leaf].data_mut()[i] = original + eps;
                let up = probe.loss(frames)?;
                probe.params.leaves_mut()[leaf].data_mut()[i] = original - eps;
                let down = probe.loss(frames)?;
                probe.params.leaves_mut()[leaf].data_mut()[i] = original;
                let numeric = (up - down) / (2.0 * eps);
                let err = (analytic[flat] - numeric).abs() / numeric.abs().max(1.0);
                worst = worst.max(err);
                flat += 1;
            }
        }
        Ok(worst)
    }
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax(values: &[Real]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}
