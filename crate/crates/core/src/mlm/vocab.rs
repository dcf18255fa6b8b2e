use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::MlmError;
use crate::masking::MaskedInstance;

pub const CLS: &str = "[CLS]";
pub const SEP: &str = "[SEP]";
pub const MASK: &str = "[MASK]";

/// Token-to-id table. Ids 0..3 are the reserved cls, sep and mask tokens;
/// content tokens follow in sorted order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "Vec<String>", into = "Vec<String>")]
pub struct TokenVocab {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl From<Vec<String>> for TokenVocab {
    fn from(tokens: Vec<String>) -> Self {
        let index = tokens.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        Self { tokens, index }
    }
}

impl From<TokenVocab> for Vec<String> {
    fn from(v: TokenVocab) -> Self {
        v.tokens
    }
}

impl TokenVocab {
    pub fn new<I, S>(content: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut content: Vec<String> = content.into_iter().map(Into::into).collect();
        content.sort_unstable();
        content.dedup();
        content.retain(|t| t != CLS && t != SEP && t != MASK);
        let mut tokens = vec![CLS.to_string(), SEP.to_string(), MASK.to_string()];
        tokens.extend(content);
        Self::from(tokens)
    }

    /// Every token that appears in the inputs or targets of `instances`.
    pub fn from_instances(instances: &[MaskedInstance]) -> Self {
        Self::new(instances.iter().flat_map(|inst| {
            inst.input
                .iter()
                .chain(inst.targets.iter().flat_map(|t| t.tokens.iter()))
                .cloned()
        }))
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id(&self, token: &str) -> Result<usize, MlmError> {
        self.index
            .get(token)
            .copied()
            .ok_or_else(|| MlmError::Vocabulary(token.to_string()))
    }

    pub fn token(&self, id: usize) -> Option<&str> {
        self.tokens.get(id).map(String::as_str)
    }

    pub fn ids<S: AsRef<str>>(&self, tokens: &[S]) -> Result<Vec<usize>, MlmError> {
        tokens.iter().map(|t| self.id(t.as_ref())).collect()
    }

    pub fn cls_id(&self) -> usize {
        0
    }

    pub fn sep_id(&self) -> usize {
        1
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }
}
