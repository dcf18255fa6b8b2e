//! Per-document n-gram counting, length-normalized PMI scoring and pruning.
//!
//! For an n-gram `w = (x_1, .., x_L)` observed in a document of `T` tokens,
//!
//! ```text
//! pmi(w) = (ln P(w) - sum_k ln P(x_k)) / L,    P(.) = count(.) / T
//! ```
//!
//! Every order shares the denominator `T`, so unigram scores are exactly 0.

use std::cmp::Ordering;
use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Document, DocumentSet};

pub const DEFAULT_MAX_N: usize = 10;
pub const DEFAULT_TOP_K: usize = 3000;
pub const DEFAULT_MIN_LEN: usize = 2;

#[derive(Debug, Error)]
pub enum NgramError {
    #[error("ngram: invalid argument: {0}")]
    Argument(String),
    #[error("ngram: n-gram {0:?} not observed in counts")]
    NotObserved(Vec<String>),
    #[error("ngram: empty document set")]
    EmptyCorpus,
    #[error("ngram: vocabulary line {line}: {reason}")]
    Format { line: usize, reason: String },
    #[error("ngram: {0}")]
    Io(#[from] std::io::Error),
}

/// Occurrence counts of every n-gram up to `max_n` within one document.
///
/// Keys borrow token windows from the document, so counting allocates one
/// map entry per distinct n-gram and nothing else.
#[derive(Debug, Clone)]
pub struct NgramCounts<'a> {
    per_n: Vec<HashMap<&'a [String], usize>>,
    doc_tokens: usize,
}

impl<'a> NgramCounts<'a> {
    pub fn max_n(&self) -> usize {
        self.per_n.len()
    }

    pub fn doc_tokens(&self) -> usize {
        self.doc_tokens
    }

    /// Counts for n-grams of length `n` (1-based).
    pub fn order(&self, n: usize) -> Option<&HashMap<&'a [String], usize>> {
        n.checked_sub(1).and_then(|i| self.per_n.get(i))
    }

    pub fn count(&self, tokens: &[String]) -> usize {
        self.order(tokens.len())
            .and_then(|m| m.get(tokens))
            .copied()
            .unwrap_or(0)
    }
}

pub fn count_ngrams(doc: &Document, max_n: usize) -> Result<NgramCounts<'_>, NgramError> {
    count_token_ngrams(&doc.tokens, max_n)
}

pub fn count_token_ngrams(tokens: &[String], max_n: usize) -> Result<NgramCounts<'_>, NgramError> {
    if max_n < 1 {
        return Err(NgramError::Argument("max_n must be at least 1".into()));
    }
    let per_n = (1..=max_n)
        .map(|n| {
            let mut counts: HashMap<&[String], usize> = HashMap::new();
            for window in tokens.windows(n) {
                *counts.entry(window).or_default() += 1;
            }
            counts
        })
        .collect();
    Ok(NgramCounts {
        per_n,
        doc_tokens: tokens.len(),
    })
}

/// Length-normalized PMI of `tokens` under `counts`.
pub fn pmi_score(tokens: &[String], counts: &NgramCounts<'_>) -> Result<f64, NgramError> {
    let not_observed = || NgramError::NotObserved(tokens.to_vec());
    if tokens.is_empty() {
        return Err(not_observed());
    }
    let joint = counts.count(tokens);
    if joint == 0 {
        return Err(not_observed());
    }
    let mut singles = Vec::with_capacity(tokens.len());
    for k in 0..tokens.len() {
        match counts.count(&tokens[k..=k]) {
            0 => return Err(not_observed()),
            c => singles.push(c),
        }
    }
    Ok(pmi_from_counts(joint, &singles, counts.doc_tokens))
}

/// `(1/L) ln(joint * total^(L-1) / prod(singles))` for `L = singles.len()`.
///
/// When the ratio fits in `u128` it is reduced to a canonical
/// `(root ratio, exponent / L)` form first, so mathematically equal scores
/// are bit-identical and rank ties are resolved by count and tokens rather
/// than rounding noise.
pub fn pmi_from_counts(joint: usize, singles: &[usize], total: usize) -> f64 {
    let len = singles.len() as u128;
    let exact = (|| {
        let mut num = joint as u128;
        for _ in 1..len {
            num = num.checked_mul(total as u128)?;
        }
        let mut den = 1u128;
        for &c in singles {
            den = den.checked_mul(c as u128)?;
        }
        Some((num, den))
    })();
    let Some((num, den)) = exact else {
        let mut logs: Vec<f64> = singles.iter().map(|&c| (c as f64 / total as f64).ln()).collect();
        logs.sort_by(f64::total_cmp);
        let sum: f64 = logs.iter().sum();
        return ((joint as f64 / total as f64).ln() - sum) / len as f64;
    };
    let g = gcd(num, den);
    let (mut num, mut den) = (num / g, den / g);
    if num == den {
        return 0.0;
    }
    let mut exponent = 1u128;
    for p in [2u32, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89, 97, 101, 103, 107, 109, 113, 127] {
        while let (Some(a), Some(b)) = (int_root(num, p), int_root(den, p)) {
            if a == num && b == den {
                break;
            }
            num = a;
            den = b;
            exponent *= p as u128;
        }
    }
    let g = gcd(exponent, len);
    ((num as f64).ln() - (den as f64).ln()) * (exponent / g) as f64 / (len / g) as f64
}

fn gcd(mut a: u128, mut b: u128) -> u128 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Exact integer `k`-th root, if `x` is a perfect `k`-th power.
fn int_root(x: u128, k: u32) -> Option<u128> {
    if x <= 1 {
        return Some(x);
    }
    let guess = (x as f64).powf(1.0 / k as f64).round() as u128;
    (guess.saturating_sub(1)..=guess + 1).find(|r| r.checked_pow(k) == Some(x))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NgramEntry {
    pub tokens: Vec<String>,
    pub count: usize,
    pub pmi: f64,
}

impl NgramEntry {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

/// Ranking used both for top-k pruning and for the vocabulary file:
/// PMI descending, then count descending, then tokens ascending.
pub fn rank_order(a: &NgramEntry, b: &NgramEntry) -> Ordering {
    b.pmi
        .total_cmp(&a.pmi)
        .then_with(|| b.count.cmp(&a.count))
        .then_with(|| a.tokens.cmp(&b.tokens))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VocabOptions {
    pub max_n: usize,
    pub top_k: usize,
    pub min_len: usize,
    /// Optional absolute PMI floor applied after top-k pruning.
    pub min_pmi: Option<f64>,
}

impl Default for VocabOptions {
    fn default() -> Self {
        Self {
            max_n: DEFAULT_MAX_N,
            top_k: DEFAULT_TOP_K,
            min_len: DEFAULT_MIN_LEN,
            min_pmi: None,
        }
    }
}

impl VocabOptions {
    fn validate(&self) -> Result<(), NgramError> {
        if self.min_len < 2 || self.max_n < self.min_len {
            return Err(NgramError::Argument(format!(
                "need max_n >= min_len >= 2 (max_n={}, min_len={})",
                self.max_n, self.min_len
            )));
        }
        if self.top_k < 1 {
            return Err(NgramError::Argument("top_k must be at least 1".into()));
        }
        Ok(())
    }
}

/// Scored, pruned n-grams of one document, in rank order.
pub fn score_document(doc: &Document, opts: &VocabOptions) -> Result<Vec<NgramEntry>, NgramError> {
    opts.validate()?;
    let counts = count_ngrams(doc, opts.max_n)?;
    let mut entries = Vec::new();
    for n in opts.min_len..=opts.max_n {
        for (&tokens, &count) in counts.order(n).into_iter().flatten() {
            entries.push(NgramEntry {
                tokens: tokens.to_vec(),
                count,
                pmi: pmi_score(tokens, &counts)?,
            });
        }
    }
    entries.sort_by(rank_order);
    entries.truncate(opts.top_k);
    if let Some(floor) = opts.min_pmi {
        entries.retain(|e| e.pmi >= floor);
    }
    Ok(entries)
}

/// Deduplicated n-gram vocabulary keyed by token tuple.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct NgramVocab {
    entries: HashMap<Vec<String>, NgramEntry>,
    max_n: usize,
}

impl NgramVocab {
    pub fn new(max_n: usize) -> Self {
        Self {
            entries: HashMap::new(),
            max_n,
        }
    }

    pub fn from_entries(max_n: usize, entries: impl IntoIterator<Item = NgramEntry>) -> Self {
        let mut vocab = Self::new(max_n);
        for e in entries {
            vocab.insert(e);
        }
        vocab
    }

    /// Inserts an entry, keeping whichever of the old and new ranks higher
    /// under [`rank_order`] (so the maximum PMI wins).
    pub fn insert(&mut self, entry: NgramEntry) {
        self.max_n = self.max_n.max(entry.len());
        match self.entries.get_mut(&entry.tokens) {
            Some(existing) => {
                if rank_order(&entry, existing) == Ordering::Less {
                    *existing = entry;
                }
            }
            None => {
                self.entries.insert(entry.tokens.clone(), entry);
            }
        }
    }

    pub fn get(&self, tokens: &[String]) -> Option<&NgramEntry> {
        self.entries.get(tokens)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn max_n(&self) -> usize {
        self.max_n
    }

    /// Length of the longest stored entry.
    pub fn longest(&self) -> usize {
        self.entries.keys().map(Vec::len).max().unwrap_or(0)
    }

    pub fn iter(&self) -> impl Iterator<Item = &NgramEntry> {
        self.entries.values()
    }

    pub fn sorted_entries(&self) -> Vec<&NgramEntry> {
        let mut v: Vec<_> = self.entries.values().collect();
        v.sort_by(|a, b| rank_order(a, b));
        v
    }

    /// TSV: `tok1 tok2 ..<TAB>count<TAB>pmi`, PMI at 6 decimals, best first.
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for e in self.sorted_entries() {
            let _ = writeln!(out, "{}\t{}\t{:.6}", e.tokens.join(" "), e.count, e.pmi);
        }
        out
    }

    pub fn parse_tsv(text: &str, max_n: usize) -> Result<Self, NgramError> {
        let mut vocab = Self::new(max_n);
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let fmt = |reason: &str| NgramError::Format {
                line: i + 1,
                reason: reason.to_string(),
            };
            let mut fields = line.split('\t');
            let (Some(toks), Some(count), Some(pmi), None) =
                (fields.next(), fields.next(), fields.next(), fields.next())
            else {
                return Err(fmt("expected 3 tab-separated fields"));
            };
            let tokens: Vec<String> = toks.split_whitespace().map(str::to_string).collect();
            if tokens.is_empty() {
                return Err(fmt("empty n-gram"));
            }
            if tokens.len() > max_n {
                return Err(fmt("n-gram longer than max_n"));
            }
            let count = count.trim().parse().map_err(|_| fmt("bad count"))?;
            let pmi = pmi.trim().parse().map_err(|_| fmt("bad pmi"))?;
            vocab.insert(NgramEntry { tokens, count, pmi });
        }
        Ok(vocab)
    }

    pub fn write_tsv(&self, path: impl AsRef<Path>) -> Result<(), NgramError> {
        std::fs::write(path, self.to_tsv())?;
        Ok(())
    }

    pub fn read_tsv(path: impl AsRef<Path>, max_n: usize) -> Result<Self, NgramError> {
        Self::parse_tsv(&std::fs::read_to_string(path)?, max_n)
    }
}

/// Scores each document independently, keeps its top-k n-grams and merges
/// the results. The merge is commutative, so the output does not depend on
/// document order or thread schedule.
pub fn build_ngram_vocab(set: &DocumentSet, opts: &VocabOptions) -> Result<NgramVocab, NgramError> {
    opts.validate()?;
    if set.is_empty() {
        return Err(NgramError::EmptyCorpus);
    }
    let per_doc: Vec<Vec<NgramEntry>> = set
        .docs()
        .par_iter()
        .map(|doc| score_document(doc, opts))
        .collect::<Result<_, _>>()?;
    let mut vocab = NgramVocab::new(opts.max_n);
    for entries in per_doc {
        for e in entries {
            vocab.insert(e);
        }
    }
    Ok(vocab)
}
