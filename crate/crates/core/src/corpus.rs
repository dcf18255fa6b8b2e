//! Corpus ingestion: cleaning, blank-line document splitting and tokenization.

use std::fmt::Write as _;
use std::ops::Range;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("corpus: cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("corpus: input yields zero documents")]
    Empty,
}

/// How cleaned text is split into tokens.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum TokenMode {
    /// Lowercased whitespace-separated words.
    #[default]
    Word,
    /// One token per retained character (spaces excluded).
    Char,
}

impl std::str::FromStr for TokenMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "word" => Ok(TokenMode::Word),
            "char" => Ok(TokenMode::Char),
            other => Err(format!("unknown token mode {other:?} (expected word|char)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub id: usize,
    pub tokens: Vec<String>,
    /// Byte range of the raw document in the input.
    pub source_offset: Range<usize>,
}

impl Document {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

/// Immutable set of non-empty documents in input order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DocumentSet {
    docs: Vec<Document>,
    total_tokens: usize,
}

impl DocumentSet {
    /// Builds a set from already-tokenized documents. Empty documents are
    /// dropped and ids are reassigned in order.
    pub fn from_token_lists<I>(lists: I) -> Result<Self, CorpusError>
    where
        I: IntoIterator<Item = Vec<String>>,
    {
        let docs = lists
            .into_iter()
            .filter(|t| !t.is_empty())
            .enumerate()
            .map(|(id, tokens)| Document {
                id,
                tokens,
                source_offset: 0..0,
            })
            .collect();
        Self::from_docs(docs)
    }

    fn from_docs(docs: Vec<Document>) -> Result<Self, CorpusError> {
        if docs.is_empty() {
            return Err(CorpusError::Empty);
        }
        let total_tokens = docs.iter().map(Document::len).sum();
        Ok(Self { docs, total_tokens })
    }

    pub fn docs(&self) -> &[Document] {
        &self.docs
    }

    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }

    pub fn total_tokens(&self) -> usize {
        self.total_tokens
    }

    /// Sorted distinct tokens over all documents.
    pub fn token_types(&self) -> Vec<String> {
        let mut types: Vec<String> = self
            .docs
            .iter()
            .flat_map(|d| d.tokens.iter().cloned())
            .collect();
        types.sort_unstable();
        types.dedup();
        types
    }

    /// Re-serializes the cleaned corpus in the ingestion format (documents
    /// separated by blank lines).
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (i, doc) in self.docs.iter().enumerate() {
            if i > 0 {
                out.push('\n');
            }
            let _ = writeln!(out, "{}", doc.tokens.join(" "));
        }
        out
    }

    /// One document per line, tokens space-joined.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for doc in &self.docs {
            let _ = writeln!(out, "{}", doc.tokens.join(" "));
        }
        out
    }
}

/// Reads and tokenizes a UTF-8 corpus file.
pub fn ingest_corpus(path: impl AsRef<Path>, mode: TokenMode) -> Result<DocumentSet, CorpusError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    })?;
    ingest_text(&text, mode)
}

pub fn ingest_text(text: &str, mode: TokenMode) -> Result<DocumentSet, CorpusError> {
    let blocks = split_blocks(text);
    let tokenized: Vec<(Range<usize>, Vec<String>)> = blocks
        .into_par_iter()
        .map(|range| {
            let tokens = tokenize_text(&text[range.clone()], mode);
            (range, tokens)
        })
        .collect();
    let docs = tokenized
        .into_iter()
        .filter(|(_, tokens)| !tokens.is_empty())
        .enumerate()
        .map(|(id, (source_offset, tokens))| Document {
            id,
            tokens,
            source_offset,
        })
        .collect();
    DocumentSet::from_docs(docs)
}

/// Byte ranges of maximal runs of non-blank lines.
fn split_blocks(text: &str) -> Vec<Range<usize>> {
    let mut blocks = Vec::new();
    let mut current: Option<Range<usize>> = None;
    let mut offset = 0;
    for line in text.split_inclusive('\n') {
        let start = offset;
        offset += line.len();
        let content = line.trim_end_matches(['\n', '\r']);
        if content.trim().is_empty() {
            if let Some(block) = current.take() {
                blocks.push(block);
            }
        } else {
            let end = start + content.len();
            match current.as_mut() {
                Some(block) => block.end = end,
                None => current = Some(start..end),
            }
        }
    }
    if let Some(block) = current {
        blocks.push(block);
    }
    blocks
}

fn is_joiner(c: char) -> bool {
    matches!(c, '-' | '\'' | '\u{2019}')
}

/// Cleans `text` and splits it into tokens.
///
/// Word mode lowercases, keeps alphanumeric runs and hyphens/apostrophes that
/// sit between two alphanumeric characters; every other character acts as a
/// separator. Char mode keeps alphanumeric characters only, one per token.
pub fn tokenize_text(text: &str, mode: TokenMode) -> Vec<String> {
    match mode {
        TokenMode::Word => {
            let chars: Vec<char> = text.chars().flat_map(char::to_lowercase).collect();
            let mut cleaned = String::with_capacity(chars.len());
            for (i, &c) in chars.iter().enumerate() {
                let keep = if c.is_alphanumeric() {
                    true
                } else if is_joiner(c) {
                    let before = i > 0 && chars[i - 1].is_alphanumeric();
                    let after = chars.get(i + 1).is_some_and(|n| n.is_alphanumeric());
                    before && after
                } else {
                    false
                };
                cleaned.push(if keep { c } else { ' ' });
            }
            cleaned.split_whitespace().map(str::to_string).collect()
        }
        TokenMode::Char => text
            .chars()
            .filter(|c| c.is_alphanumeric())
            .map(String::from)
            .collect(),
    }
}
