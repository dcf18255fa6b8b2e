//! N-gram masking: leftmost-longest matching, budgeted span selection with
//! span-level 80/10/10 corruption, per-epoch dynamic masking and the
//! geometric random-span baseline.
//!
//! Spans returned by [`match_ngrams`] and [`sample_geometric_spans`] index
//! the raw token list. Spans stored in a [`MaskedInstance`] index its
//! `input`, which carries a leading cls token, so they are shifted by one.

use std::fmt::Write as _;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Geometric};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::DocumentSet;
use crate::ngram::{NgramEntry, NgramVocab};
use crate::seed;

#[derive(Debug, Error)]
pub enum MaskingError {
    #[error("masking: invalid config: {0}")]
    Config(String),
    #[error("masking: invalid matches: {0}")]
    Matches(String),
    #[error("masking: empty token sequence")]
    EmptySequence,
    #[error("masking: instance line {line}: {source}")]
    Json {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
}

/// Inclusive token range `[start, end]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Self {
        debug_assert!(start <= end);
        Self { start, end }
    }

    pub fn len(&self) -> usize {
        self.end - self.start + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn overlaps(&self, other: &Span) -> bool {
        self.start <= other.end && other.start <= self.end
    }

    pub fn shifted(&self, by: usize) -> Span {
        Span::new(self.start + by, self.end + by)
    }

    pub fn range(&self) -> std::ops::RangeInclusive<usize> {
        self.start..=self.end
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaskingConfig {
    pub mask_ratio: f64,
    pub p_mask: f64,
    pub p_random: f64,
    pub p_keep: f64,
    pub max_n: usize,
    pub geo_p: f64,
    pub geo_lmax: usize,
    /// Maximum instance length including cls and sep.
    pub max_seq_len: usize,
    pub mask_token: String,
    pub cls_token: String,
    pub sep_token: String,
}

impl Default for MaskingConfig {
    fn default() -> Self {
        Self {
            mask_ratio: 0.15,
            p_mask: 0.8,
            p_random: 0.1,
            p_keep: 0.1,
            max_n: 10,
            geo_p: 0.2,
            geo_lmax: 10,
            max_seq_len: 512,
            mask_token: "[MASK]".into(),
            cls_token: "[CLS]".into(),
            sep_token: "[SEP]".into(),
        }
    }
}

const SPLIT_TOLERANCE: f64 = 1e-9;

impl MaskingConfig {
    pub fn validate(&self) -> Result<(), MaskingError> {
        let err = |m: String| Err(MaskingError::Config(m));
        let split = [self.p_mask, self.p_random, self.p_keep];
        if split.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return err(format!("corruption probabilities out of [0,1]: {split:?}"));
        }
        if (split.iter().sum::<f64>() - 1.0).abs() > SPLIT_TOLERANCE {
            return err(format!("corruption probabilities must sum to 1, got {split:?}"));
        }
        if !(self.mask_ratio > 0.0 && self.mask_ratio < 1.0) {
            return err(format!("mask_ratio must be in (0,1), got {}", self.mask_ratio));
        }
        if !(self.geo_p > 0.0 && self.geo_p < 1.0) {
            return err(format!("geo_p must be in (0,1), got {}", self.geo_p));
        }
        if self.geo_lmax < 1 || self.max_n < 1 {
            return err("geo_lmax and max_n must be at least 1".into());
        }
        if self.max_seq_len < 3 {
            return err("max_seq_len must leave room for cls, sep and one token".into());
        }
        Ok(())
    }

    /// `max(1, round(mask_ratio * len))`, never more than `len`.
    pub fn budget(&self, len: usize) -> usize {
        ((self.mask_ratio * len as f64).round() as usize).max(1).min(len)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CorruptionMode {
    Mask,
    Random,
    Keep,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Target {
    #[serde(flatten)]
    pub span: Span,
    /// Original tokens under `span`.
    pub tokens: Vec<String>,
    pub mode: CorruptionMode,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MaskedInstance {
    pub input: Vec<String>,
    pub targets: Vec<Target>,
    pub seed: u64,
}

impl MaskedInstance {
    pub fn masked_count(&self) -> usize {
        self.targets.iter().map(|t| t.span.len()).sum()
    }

    /// Number of content tokens (input without cls and sep).
    pub fn content_len(&self) -> usize {
        self.input.len().saturating_sub(2)
    }

    /// The uncorrupted sequence, including cls and sep.
    pub fn reconstruct(&self) -> Vec<String> {
        let mut out = self.input.clone();
        for t in &self.targets {
            for (pos, tok) in t.span.range().zip(&t.tokens) {
                out[pos] = tok.clone();
            }
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("instance serialization is infallible")
    }
}

pub fn to_jsonl(instances: &[MaskedInstance]) -> String {
    let mut out = String::new();
    for inst in instances {
        let _ = writeln!(out, "{}", inst.to_json());
    }
    out
}

pub fn parse_jsonl(text: &str) -> Result<Vec<MaskedInstance>, MaskingError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|source| MaskingError::Json { line: i + 1, source })
        })
        .collect()
}

/// Greedy leftmost-longest scan: at each position take the longest
/// vocabulary n-gram starting there and continue after its end.
pub fn match_ngrams<'v>(tokens: &[String], vocab: &'v NgramVocab) -> Vec<(Span, &'v NgramEntry)> {
    let longest = vocab.longest();
    let mut out = Vec::new();
    let mut pos = 0;
    while pos < tokens.len() {
        let max_len = longest.min(tokens.len() - pos);
        let hit = (1..=max_len)
            .rev()
            .find_map(|len| vocab.get(&tokens[pos..pos + len]).map(|e| (len, e)));
        match hit {
            Some((len, entry)) => {
                out.push((Span::new(pos, pos + len - 1), entry));
                pos += len;
            }
            None => pos += 1,
        }
    }
    out
}

fn check_matches(len: usize, matches: &[Span]) -> Result<(), MaskingError> {
    let mut sorted = matches.to_vec();
    sorted.sort();
    for (i, s) in sorted.iter().enumerate() {
        if s.start > s.end || s.end >= len {
            return Err(MaskingError::Matches(format!("{s:?} out of range for length {len}")));
        }
        if i > 0 && sorted[i - 1].overlaps(s) {
            return Err(MaskingError::Matches(format!("{:?} overlaps {s:?}", sorted[i - 1])));
        }
    }
    Ok(())
}

fn draw_mode(config: &MaskingConfig, rng: &mut ChaCha8Rng) -> CorruptionMode {
    let r: f64 = rng.random();
    if r < config.p_mask {
        CorruptionMode::Mask
    } else if r < config.p_mask + config.p_random {
        CorruptionMode::Random
    } else {
        CorruptionMode::Keep
    }
}

/// Applies span-level corruption to `selected` (raw-token coordinates) and
/// wraps the result with cls/sep.
fn corrupt(
    tokens: &[String],
    mut selected: Vec<Span>,
    config: &MaskingConfig,
    pool: &[String],
    rng: &mut ChaCha8Rng,
    seed: u64,
) -> MaskedInstance {
    let pool = if pool.is_empty() { tokens } else { pool };
    let mut input = Vec::with_capacity(tokens.len() + 2);
    input.push(config.cls_token.clone());
    input.extend_from_slice(tokens);
    input.push(config.sep_token.clone());

    // modes are drawn in selection order, targets reported in position order
    let mut targets = Vec::with_capacity(selected.len());
    for span in selected.drain(..) {
        let mode = draw_mode(config, rng);
        let shifted = span.shifted(1);
        match mode {
            CorruptionMode::Mask => {
                for p in shifted.range() {
                    input[p] = config.mask_token.clone();
                }
            }
            CorruptionMode::Random => {
                for p in shifted.range() {
                    input[p] = pool[rng.random_range(0..pool.len())].clone();
                }
            }
            CorruptionMode::Keep => {}
        }
        targets.push(Target {
            span: shifted,
            tokens: tokens[span.range()].to_vec(),
            mode,
        });
    }
    targets.sort_by_key(|t| t.span);
    MaskedInstance { input, targets, seed }
}

/// Builds one masked instance.
///
/// Candidates are the matched n-gram spans plus a single-token span for
/// every position outside a match. Candidates are drawn uniformly among the
/// unused ones that still fit the remaining budget; a span is masked whole
/// or not at all.
pub fn generate_instance(
    tokens: &[String],
    matches: &[Span],
    config: &MaskingConfig,
    pool: &[String],
    seed: u64,
) -> Result<MaskedInstance, MaskingError> {
    config.validate()?;
    if tokens.is_empty() {
        return Err(MaskingError::EmptySequence);
    }
    check_matches(tokens.len(), matches)?;

    let mut covered = vec![false; tokens.len()];
    for m in matches {
        covered[m.range()].iter_mut().for_each(|c| *c = true);
    }
    let mut candidates: Vec<Span> = matches.to_vec();
    candidates.extend(
        (0..tokens.len())
            .filter(|&p| !covered[p])
            .map(|p| Span::new(p, p)),
    );
    candidates.sort();

    let mut rng = seed::rng(seed);
    let mut used = vec![false; candidates.len()];
    let mut remaining = config.budget(tokens.len());
    let mut selected = Vec::new();
    let mut fitting = Vec::with_capacity(candidates.len());
    loop {
        fitting.clear();
        fitting.extend((0..candidates.len()).filter(|&i| !used[i] && candidates[i].len() <= remaining));
        if fitting.is_empty() {
            break;
        }
        let pick = fitting[rng.random_range(0..fitting.len())];
        used[pick] = true;
        remaining -= candidates[pick].len();
        selected.push(candidates[pick]);
    }
    Ok(corrupt(tokens, selected, config, pool, &mut rng, seed))
}

/// Truncated geometric span length: `P(l) ∝ (1-p)^(l-1) p` for `1 <= l <= lmax`.
fn draw_span_len(geo: &Geometric, lmax: usize, rng: &mut ChaCha8Rng) -> usize {
    loop {
        let failures = geo.sample(rng);
        if failures < lmax as u64 {
            return failures as usize + 1;
        }
    }
}

fn sample_spans(tokens: &[String], config: &MaskingConfig, rng: &mut ChaCha8Rng) -> Result<Vec<Span>, MaskingError> {
    let geo = Geometric::new(config.geo_p).map_err(|e| MaskingError::Config(e.to_string()))?;
    let len = tokens.len();
    let mut taken = vec![false; len];
    let mut remaining = config.budget(len);
    let mut spans = Vec::new();
    let max_attempts = 100 * len + 100;
    let mut attempts = 0;
    while remaining > 0 && attempts < max_attempts {
        attempts += 1;
        let l = draw_span_len(&geo, config.geo_lmax, rng);
        if l > remaining || l > len {
            continue;
        }
        let start = rng.random_range(0..=len - l);
        let span = Span::new(start, start + l - 1);
        if taken[span.range()].iter().any(|&t| t) {
            continue;
        }
        taken[span.range()].iter_mut().for_each(|t| *t = true);
        remaining -= l;
        spans.push(span);
    }
    Ok(spans)
}

/// Random-span baseline: lengths from a geometric distribution truncated at
/// `geo_lmax`, uniform starts, overlapping draws rejected, under the same
/// token budget as n-gram masking. Returned spans are sorted.
pub fn sample_geometric_spans(tokens: &[String], config: &MaskingConfig, seed: u64) -> Result<Vec<Span>, MaskingError> {
    config.validate()?;
    let mut rng = seed::rng(seed);
    let mut spans = sample_spans(tokens, config, &mut rng)?;
    spans.sort();
    Ok(spans)
}

/// Masked instance whose targets come from [`sample_geometric_spans`].
pub fn generate_span_instance(
    tokens: &[String],
    config: &MaskingConfig,
    pool: &[String],
    seed: u64,
) -> Result<MaskedInstance, MaskingError> {
    config.validate()?;
    if tokens.is_empty() {
        return Err(MaskingError::EmptySequence);
    }
    let mut rng = seed::rng(seed);
    let spans = sample_spans(tokens, config, &mut rng)?;
    Ok(corrupt(tokens, spans, config, pool, &mut rng, seed))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MaskingStrategy {
    #[default]
    Ngram,
    /// Geometric random spans.
    Span,
}

impl std::str::FromStr for MaskingStrategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "ngram" => Ok(Self::Ngram),
            "span" => Ok(Self::Span),
            other => Err(format!("unknown masking strategy {other:?} (expected ngram|span)")),
        }
    }
}

/// One instance per document for the given epoch, n-gram strategy.
pub fn generate_epoch_dataset(
    set: &DocumentSet,
    vocab: &NgramVocab,
    config: &MaskingConfig,
    base_seed: u64,
    epoch: u64,
) -> Result<Vec<MaskedInstance>, MaskingError> {
    generate_epoch_dataset_with(set, vocab, config, base_seed, epoch, MaskingStrategy::Ngram)
}

/// One instance per document. Each document's seed is
/// [`seed::mix_seed`]`(base_seed, doc.id, epoch)`, so the output does not
/// depend on scheduling. Documents are truncated to `max_seq_len - 2`
/// tokens; random replacements draw from all corpus token types.
pub fn generate_epoch_dataset_with(
    set: &DocumentSet,
    vocab: &NgramVocab,
    config: &MaskingConfig,
    base_seed: u64,
    epoch: u64,
    strategy: MaskingStrategy,
) -> Result<Vec<MaskedInstance>, MaskingError> {
    config.validate()?;
    let pool = set.token_types();
    let content_max = config.max_seq_len - 2;
    set.docs()
        .par_iter()
        .map(|doc| {
            let tokens = &doc.tokens[..doc.tokens.len().min(content_max)];
            let seed = seed::mix_seed(base_seed, doc.id as u64, epoch);
            match strategy {
                MaskingStrategy::Ngram => {
                    let spans: Vec<Span> = match_ngrams(tokens, vocab).into_iter().map(|(s, _)| s).collect();
                    generate_instance(tokens, &spans, config, &pool, seed)
                }
                MaskingStrategy::Span => generate_span_instance(tokens, config, &pool, seed),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(words: &str) -> Vec<String> {
        words.split_whitespace().map(str::to_string).collect()
    }

    fn vocab(grams: &[&str]) -> NgramVocab {
        NgramVocab::from_entries(
            10,
            grams.iter().map(|g| NgramEntry { tokens: s(g), count: 1, pmi: 1.0 }),
        )
    }

    #[test]
    fn longest_match_wins() {
        let v = vocab(&["a b", "a b c"]);
        let m = match_ngrams(&s("a b c"), &v);
        assert_eq!(m.len(), 1);
        assert_eq!(m[0].0, Span::new(0, 2));
        assert_eq!(m[0].1.tokens, s("a b c"));
    }

    #[test]
    fn empty_vocab_no_matches() {
        assert!(match_ngrams(&s("a b c"), &NgramVocab::new(10)).is_empty());
    }

    #[test]
    fn scan_resumes_after_match() {
        let v = vocab(&["a b", "b c", "c d"]);
        let m: Vec<Span> = match_ngrams(&s("a b c d"), &v).into_iter().map(|x| x.0).collect();
        assert_eq!(m, vec![Span::new(0, 1), Span::new(2, 3)]);
    }

    #[test]
    fn single_token_is_masked() {
        let cfg = MaskingConfig::default();
        let inst = generate_instance(&s("x"), &[], &cfg, &[], 3).unwrap();
        assert_eq!(inst.targets.len(), 1);
        assert_eq!(inst.targets[0].span, Span::new(1, 1));
        assert_eq!(inst.input.first().unwrap(), "[CLS]");
        assert_eq!(inst.input.last().unwrap(), "[SEP]");
    }

    #[test]
    fn fixed_seed_is_deterministic() {
        let cfg = MaskingConfig::default();
        let toks = s("one two three four five six seven eight nine ten eleven twelve thirteen");
        let m = [Span::new(2, 4), Span::new(7, 8)];
        let a = generate_instance(&toks, &m, &cfg, &toks, 99).unwrap();
        let b = generate_instance(&toks, &m, &cfg, &toks, 99).unwrap();
        assert_eq!(a.to_json(), b.to_json());
    }

    #[test]
    fn bad_split_rejected() {
        let cfg = MaskingConfig { p_keep: 0.2, ..Default::default() };
        assert!(matches!(
            generate_instance(&s("a"), &[], &cfg, &[], 0),
            Err(MaskingError::Config(_))
        ));
    }

    #[test]
    fn overlapping_matches_rejected() {
        let cfg = MaskingConfig::default();
        let r = generate_instance(&s("a b c"), &[Span::new(0, 1), Span::new(1, 2)], &cfg, &[], 0);
        assert!(matches!(r, Err(MaskingError::Matches(_))));
    }

    #[test]
    fn ngram_masked_whole() {
        // budget = round(0.15 * 20) = 3; the only candidates are one 3-gram
        // and 17 single tokens.
        let cfg = MaskingConfig { p_mask: 1.0, p_random: 0.0, p_keep: 0.0, ..Default::default() };
        let toks: Vec<String> = (0..20).map(|i| format!("t{i}")).collect();
        for seed in 0..50 {
            let inst = generate_instance(&toks, &[Span::new(5, 7)], &cfg, &[], seed).unwrap();
            assert_eq!(inst.masked_count(), 3);
            for t in &inst.targets {
                assert!(t.span.len() == 1 || t.span == Span::new(6, 8));
                assert!(inst.input[t.span.range()].iter().all(|x| x == "[MASK]"));
            }
        }
    }

    #[test]
    fn geometric_lmax_one_gives_single_tokens() {
        let cfg = MaskingConfig { geo_lmax: 1, ..Default::default() };
        let toks: Vec<String> = (0..100).map(|i| format!("t{i}")).collect();
        let spans = sample_geometric_spans(&toks, &cfg, 5).unwrap();
        assert_eq!(spans.len(), 15);
        assert!(spans.iter().all(|s| s.len() == 1));
    }

    #[test]
    fn geometric_spans_disjoint_within_budget() {
        let cfg = MaskingConfig::default();
        let toks: Vec<String> = (0..200).map(|i| format!("t{i}")).collect();
        for seed in 0..50 {
            let spans = sample_geometric_spans(&toks, &cfg, seed).unwrap();
            let total: usize = spans.iter().map(Span::len).sum();
            assert_eq!(total, 30);
            for w in spans.windows(2) {
                assert!(w[0].end < w[1].start);
            }
        }
    }

    #[test]
    fn epoch_dataset_truncates() {
        let toks: Vec<String> = (0..600).map(|i| format!("w{}", i % 37)).collect();
        let set = DocumentSet::from_token_lists([toks]).unwrap();
        let data = generate_epoch_dataset(&set, &NgramVocab::new(10), &MaskingConfig::default(), 1, 0).unwrap();
        assert_eq!(data[0].input.len(), 512);
        assert_eq!(data[0].reconstruct()[511], "[SEP]");
    }

    #[test]
    fn jsonl_shape() {
        let inst = MaskedInstance {
            input: s("[CLS] [MASK] b [SEP]"),
            targets: vec![Target { span: Span::new(1, 1), tokens: s("a"), mode: CorruptionMode::Mask }],
            seed: 4,
        };
        assert_eq!(
            inst.to_json(),
            r#"{"input":["[CLS]","[MASK]","b","[SEP]"],"targets":[{"start":1,"end":1,"tokens":["a"],"mode":"mask"}],"seed":4}"#
        );
        assert_eq!(parse_jsonl(&to_jsonl(&[inst.clone()])).unwrap(), vec![inst]);
    }
}
