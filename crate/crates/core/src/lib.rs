//! Universal-representation toolkit.
//!
//! The pipeline runs in stages that each live in their own module:
//!
//! * [`corpus`] reads blank-line separated text into tokenized documents.
//! * [`ngram`] counts n-grams per document, scores them with length-normalized
//!   PMI and prunes them into an [`ngram::NgramVocab`].
//! * [`masking`] matches vocabulary n-grams leftmost-longest and produces
//!   masked LM training instances (plus a geometric-span baseline).
//! * [`mlm`] is a small transformer encoder trained on the n-gram prediction
//!   objective, with analytic gradients and mean-pooled embeddings.
//! * [`analogy`], [`retrieval`] and [`geometry`] evaluate embeddings.

pub mod analogy;
pub mod corpus;
pub mod geometry;
pub mod masking;
pub mod mlm;
pub mod ngram;
pub mod retrieval;
pub mod seed;
pub mod vector;

pub use analogy::{EmbeddingProvider, ProviderError};
pub use corpus::{Document, DocumentSet, TokenMode};
pub use masking::{MaskedInstance, MaskingConfig, Span};
pub use ngram::{NgramEntry, NgramVocab};
