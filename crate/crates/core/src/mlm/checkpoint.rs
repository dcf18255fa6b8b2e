use std::path::Path;

use serde::{Deserialize, Serialize};

use super::params::ModelParams;
use super::vocab::TokenVocab;
use super::{MlmError, ModelConfig};

const FORMAT: &str = "unirep-encoder/1";

/// JSON checkpoint: config, vocabulary and the flat parameter vector.
/// Floats are written in shortest round-trip form, so loading reproduces
/// the parameters bit for bit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub config: ModelConfig,
    pub vocab: TokenVocab,
    pub params: Vec<f64>,
}

impl Checkpoint {
    pub fn new(params: &ModelParams, vocab: &TokenVocab) -> Self {
        Self {
            format: FORMAT.into(),
            config: *params.config(),
            vocab: vocab.clone(),
            params: params.values().to_vec(),
        }
    }

    pub fn into_parts(self) -> Result<(ModelParams, TokenVocab), MlmError> {
        if self.format != FORMAT {
            return Err(MlmError::Checkpoint(format!("unsupported format {:?}", self.format)));
        }
        if self.vocab.len() != self.config.vocab_size {
            return Err(MlmError::Checkpoint("vocabulary size does not match config".into()));
        }
        let params = ModelParams::from_values(self.config, self.params)?;
        Ok((params, self.vocab))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), MlmError> {
        let json = serde_json::to_string(self).map_err(|e| MlmError::Checkpoint(e.to_string()))?;
        std::fs::write(path, json)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, MlmError> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| MlmError::Checkpoint(e.to_string()))
    }
}
