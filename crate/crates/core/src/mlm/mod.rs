//! Small transformer encoder trained on the n-gram masked LM objective.
//!
//! Post-LN BERT-style blocks, learned absolute positions, tanh-GELU
//! feed-forward and an output projection tied to the token embeddings.
//! Everything runs in `f64` and gradients are computed analytically.

mod checkpoint;
mod model;
mod params;
mod train;
mod vocab;

use thiserror::Error;

use crate::analogy::{EmbeddingProvider, ProviderError};
use crate::corpus::{tokenize_text, TokenMode};

pub use checkpoint::Checkpoint;
pub use model::{embed, embed_ids, grad, mlm_loss, Gradient, Loss};
pub use params::{init_model, LayerSlots, Layout, ModelParams, Slot};
pub use train::{train, TrainConfig, TrainReport};
pub use vocab::TokenVocab;

#[derive(Debug, Error)]
pub enum MlmError {
    #[error("mlm: invalid config: {0}")]
    Config(String),
    #[error("mlm: token {0:?} not in vocabulary")]
    Vocabulary(String),
    #[error("mlm: sequence of {len} tokens exceeds max_len {max_len}")]
    TooLong { len: usize, max_len: usize },
    #[error("mlm: empty batch")]
    EmptyBatch,
    #[error("mlm: training diverged at step {step} (loss {loss})")]
    Diverged { step: usize, loss: f64 },
    #[error("mlm: degenerate embedding (zero norm)")]
    DegenerateEmbedding,
    #[error("mlm: checkpoint: {0}")]
    Checkpoint(String),
    #[error("mlm: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct ModelConfig {
    pub layers: usize,
    pub heads: usize,
    pub d_model: usize,
    pub d_ff: usize,
    pub vocab_size: usize,
    pub max_len: usize,
}

impl ModelConfig {
    /// Default toy shape for a given vocabulary size.
    pub fn toy(vocab_size: usize) -> Self {
        Self {
            layers: 2,
            heads: 4,
            d_model: 64,
            d_ff: 128,
            vocab_size,
            max_len: 128,
        }
    }

    pub fn validate(&self) -> Result<(), MlmError> {
        let dims = [self.layers, self.heads, self.d_model, self.d_ff, self.vocab_size, self.max_len];
        if dims.contains(&0) {
            return Err(MlmError::Config(format!("all dimensions must be positive: {self:?}")));
        }
        if self.d_model % self.heads != 0 {
            return Err(MlmError::Config(format!(
                "d_model {} not divisible by heads {}",
                self.d_model, self.heads
            )));
        }
        Ok(())
    }

    pub fn head_dim(&self) -> usize {
        self.d_model / self.heads
    }

    /// Closed-form parameter count.
    pub fn param_count(&self) -> usize {
        let (d, f, v) = (self.d_model, self.d_ff, self.vocab_size);
        let per_layer = 4 * (d * d + d) + 2 * d + (d * f + f) + (f * d + d) + 2 * d;
        v * d + self.max_len * d + 2 * d + self.layers * per_layer + v
    }
}

/// Trained encoder used as an embedding provider: text is tokenized with
/// `mode` and mean-pooled by [`embed`].
#[derive(Debug, Clone)]
pub struct Encoder {
    pub params: ModelParams,
    pub vocab: TokenVocab,
    pub mode: TokenMode,
}

impl Encoder {
    pub fn load(path: impl AsRef<std::path::Path>, mode: TokenMode) -> Result<Self, MlmError> {
        let (params, vocab) = Checkpoint::load(path)?.into_parts()?;
        Ok(Self { params, vocab, mode })
    }
}

impl EmbeddingProvider for Encoder {
    fn embed(&self, text: &str) -> Result<Vec<f64>, ProviderError> {
        embed(&self.params, &self.vocab, &tokenize_text(text, self.mode)).map_err(|e| ProviderError::new(text, e.to_string()))
    }
}
