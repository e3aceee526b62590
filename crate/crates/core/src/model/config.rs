use serde::{Deserialize, Serialize};

use super::ModelError;

/// Architecture hyperparameters. Every size is configurable; the defaults
/// describe the 2×128-frame classifier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    /// Samples per channel in one frame.
    pub frame_length: usize,
    /// Input rows: I and Q.
    pub in_channels: usize,
    pub residual_channels: usize,
    pub residual_blocks: usize,
    /// Width of the convolutions inside each residual block (odd).
    pub residual_kernel: usize,
    pub reduce_kernel: usize,
    pub reduce_stride: usize,
    /// Hidden units per LSTM direction.
    pub lstm_hidden: usize,
    pub lstm_layers: usize,
    /// Widths of the hidden dense layers; a final `num_classes` layer follows.
    pub dense_sizes: Vec<usize>,
    pub num_classes: usize,
    /// Divide attention scores by `√(2·lstm_hidden)`.
    pub scaled_attention: bool,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            frame_length: 128,
            in_channels: 2,
            residual_channels: 32,
            residual_blocks: 2,
            residual_kernel: 3,
            reduce_kernel: 3,
            reduce_stride: 2,
            lstm_hidden: 64,
            lstm_layers: 2,
            dense_sizes: vec![128, 64],
            num_classes: 11,
            scaled_attention: false,
            seed: 0,
        }
    }
}

impl ModelConfig {
    pub fn with_classes(num_classes: usize) -> Self {
        ModelConfig {
            num_classes,
            ..ModelConfig::default()
        }
    }

    pub fn reduce_padding(&self) -> usize {
        self.reduce_kernel.saturating_sub(1) / 2
    }

    /// Sequence length fed to the LSTM.
    pub fn sequence_length(&self) -> usize {
        let padded = self.frame_length + 2 * self.reduce_padding();
        if self.reduce_stride == 0 || self.reduce_kernel > padded {
            return 0;
        }
        (padded - self.reduce_kernel) / self.reduce_stride + 1
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let err = |field: &'static str, reason: &str| {
            Err(ModelError::Config {
                field,
                reason: reason.to_string(),
            })
        };
        let positive = [
            ("frame_length", self.frame_length),
            ("residual_channels", self.residual_channels),
            ("residual_blocks", self.residual_blocks),
            ("residual_kernel", self.residual_kernel),
            ("reduce_kernel", self.reduce_kernel),
            ("reduce_stride", self.reduce_stride),
            ("lstm_hidden", self.lstm_hidden),
            ("lstm_layers", self.lstm_layers),
        ];
        for (field, value) in positive {
            if value == 0 {
                return err(field, "must be at least 1");
            }
        }
        if self.in_channels != 2 {
            return err("in_channels", "IQ frames carry exactly 2 channels");
        }
        if self.residual_kernel.is_multiple_of(2) {
            return err("residual_kernel", "must be odd to preserve frame length");
        }
        if self.dense_sizes.contains(&0) {
            return err("dense_sizes", "every layer needs at least 1 unit");
        }
        if self.num_classes < 2 {
            return err("num_classes", "need at least 2 classes");
        }
        if self.sequence_length() == 0 {
            return err("reduce_kernel", "reduction leaves no time steps for this frame_length");
        }
        Ok(())
    }
}
