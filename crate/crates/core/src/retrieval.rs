//! Lexical and embedding ranking, FAQ evaluation and two-stage retrieval.
//!
//! BM25 uses `k1 = 1.2`, `b = 0.75` and `IDF(t) = ln(1 + (N - df + 0.5) / (df + 0.5))`.
//! TF-IDF is the cosine between `(1 + ln tf) * idf` vectors with the smoothed
//! `idf = ln((1 + N) / (1 + df)) + 1`. Every ranking breaks score ties by
//! ascending document id.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt::Write as _;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analogy::{unit, EmbeddingProvider, ProviderError};
use crate::corpus::{tokenize_text, TokenMode};
use crate::vector;

pub const BM25_K1: f64 = 1.2;
pub const BM25_B: f64 = 0.75;
pub const DEFAULT_RERANK_K: usize = 100;
pub const MAX_TEMPLATE_SENTENCES: usize = 6;

#[derive(Debug, Error)]
pub enum RetrievalError {
    #[error("retrieval: empty document collection")]
    EmptyCollection,
    #[error("retrieval: document id {id} out of range (collection has {len})")]
    InvalidDoc { id: usize, len: usize },
    #[error("retrieval: line {line}: {reason}")]
    Format { line: usize, reason: String },
    #[error("retrieval: invalid argument: {0}")]
    Argument(String),
    #[error("retrieval: {0}")]
    Provider(#[from] ProviderError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LexicalMode {
    Bm25,
    Tfidf,
}

impl FromStr for LexicalMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "bm25" => Ok(Self::Bm25),
            "tfidf" | "tf-idf" => Ok(Self::Tfidf),
            other => Err(format!("unknown lexical mode {other:?} (expected bm25 or tfidf)")),
        }
    }
}

/// Immutable term statistics over a document collection.
#[derive(Debug, Clone, PartialEq)]
pub struct Index {
    mode: TokenMode,
    texts: Vec<String>,
    tf: Vec<HashMap<String, usize>>,
    df: HashMap<String, usize>,
    lengths: Vec<usize>,
    avgdl: f64,
    tfidf_norms: Vec<f64>,
}

/// Builds an index over pre-tokenized documents. Document text (used by
/// embedding providers) is the tokens joined by single spaces.
pub fn build_index(docs: &[Vec<String>]) -> Result<Index, RetrievalError> {
    let texts = docs.iter().map(|d| d.join(" ")).collect();
    Index::build(texts, docs.to_vec(), TokenMode::Word)
}

impl Index {
    /// Tokenizes and indexes raw document texts.
    pub fn from_texts(texts: Vec<String>, mode: TokenMode) -> Result<Self, RetrievalError> {
        let tokens = texts.par_iter().map(|t| tokenize_text(t, mode)).collect();
        Self::build(texts, tokens, mode)
    }

    fn build(texts: Vec<String>, docs: Vec<Vec<String>>, mode: TokenMode) -> Result<Self, RetrievalError> {
        if docs.is_empty() {
            return Err(RetrievalError::EmptyCollection);
        }
        let tf: Vec<HashMap<String, usize>> = docs
            .par_iter()
            .map(|d| {
                let mut m = HashMap::new();
                for t in d {
                    *m.entry(t.clone()).or_insert(0) += 1;
                }
                m
            })
            .collect();
        let mut df = HashMap::new();
        for m in &tf {
            for t in m.keys() {
                *df.entry(t.clone()).or_insert(0) += 1;
            }
        }
        let lengths: Vec<usize> = docs.iter().map(Vec::len).collect();
        let avgdl = lengths.iter().sum::<usize>() as f64 / lengths.len() as f64;
        let mut index = Self {
            mode,
            texts,
            tf,
            df,
            lengths,
            avgdl,
            tfidf_norms: Vec::new(),
        };
        // sorted terms keep the summation order independent of hashing
        index.tfidf_norms = (0..index.len())
            .map(|d| {
                let mut terms: Vec<(&String, &usize)> = index.tf[d].iter().collect();
                terms.sort();
                terms
                    .into_iter()
                    .map(|(t, &c)| (log_tf(c) * index.tfidf_idf(t)).powi(2))
                    .sum::<f64>()
                    .sqrt()
            })
            .collect();
        Ok(index)
    }

    pub fn len(&self) -> usize {
        self.lengths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lengths.is_empty()
    }

    pub fn doc_count(&self) -> usize {
        self.len()
    }

    pub fn mode(&self) -> TokenMode {
        self.mode
    }

    pub fn df(&self, term: &str) -> usize {
        self.df.get(term).copied().unwrap_or(0)
    }

    pub fn tf(&self, doc: usize, term: &str) -> usize {
        self.tf.get(doc).and_then(|m| m.get(term)).copied().unwrap_or(0)
    }

    pub fn doc_len(&self, doc: usize) -> usize {
        self.lengths[doc]
    }

    pub fn avgdl(&self) -> f64 {
        self.avgdl
    }

    pub fn text(&self, doc: usize) -> &str {
        &self.texts[doc]
    }

    pub fn texts(&self) -> &[String] {
        &self.texts
    }

    pub fn tokenize(&self, text: &str) -> Vec<String> {
        tokenize_text(text, self.mode)
    }

    pub fn bm25_idf(&self, term: &str) -> f64 {
        let n = self.len() as f64;
        let df = self.df(term) as f64;
        (1.0 + (n - df + 0.5) / (df + 0.5)).ln()
    }

    pub fn tfidf_idf(&self, term: &str) -> f64 {
        ((1.0 + self.len() as f64) / (1.0 + self.df(term) as f64)).ln() + 1.0
    }

    fn check(&self, doc: usize) -> Result<(), RetrievalError> {
        if doc < self.len() {
            Ok(())
        } else {
            Err(RetrievalError::InvalidDoc { id: doc, len: self.len() })
        }
    }

    /// Sums over distinct query terms.
    fn bm25(&self, query: &[String], doc: usize) -> f64 {
        let len_norm = if self.avgdl > 0.0 { self.lengths[doc] as f64 / self.avgdl } else { 0.0 };
        distinct(query)
            .into_iter()
            .map(|t| {
                let tf = self.tf(doc, t) as f64;
                if tf == 0.0 {
                    return 0.0;
                }
                self.bm25_idf(t) * tf * (BM25_K1 + 1.0) / (tf + BM25_K1 * (1.0 - BM25_B + BM25_B * len_norm))
            })
            .sum()
    }

    fn tfidf(&self, query: &[String], doc: usize) -> f64 {
        let mut qtf: BTreeMap<&str, usize> = BTreeMap::new();
        for t in query {
            *qtf.entry(t.as_str()).or_insert(0) += 1;
        }
        let mut dot = 0.0;
        let mut qnorm = 0.0;
        for (t, &c) in &qtf {
            let q = log_tf(c) * self.tfidf_idf(t);
            qnorm += q * q;
            let dtf = self.tf(doc, t);
            if dtf > 0 {
                dot += q * log_tf(dtf) * self.tfidf_idf(t);
            }
        }
        let denom = qnorm.sqrt() * self.tfidf_norms[doc];
        if denom == 0.0 {
            0.0
        } else {
            dot / denom
        }
    }
}

fn log_tf(count: usize) -> f64 {
    1.0 + (count as f64).ln()
}

fn distinct(query: &[String]) -> Vec<&String> {
    let mut seen = HashSet::new();
    query.iter().filter(|t| seen.insert(t.as_str())).collect()
}

pub fn score_lexical(index: &Index, query: &[String], doc: usize, mode: LexicalMode) -> Result<f64, RetrievalError> {
    index.check(doc)?;
    Ok(match mode {
        LexicalMode::Bm25 => index.bm25(query, doc),
        LexicalMode::Tfidf => index.tfidf(query, doc),
    })
}

/// `(doc id, score)` pairs, descending by score, ties by ascending id.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankedList {
    entries: Vec<(usize, f64)>,
}

impl RankedList {
    /// Ranks arbitrary `(id, score)` pairs. Ids must be unique.
    pub fn from_pairs(mut entries: Vec<(usize, f64)>) -> Self {
        entries.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        Self { entries }
    }

    /// Ranks `scores[i]` as the score of document `i`.
    pub fn from_scores(scores: Vec<f64>) -> Self {
        Self::from_pairs(scores.into_iter().enumerate().collect())
    }

    pub fn entries(&self) -> &[(usize, f64)] {
        &self.entries
    }

    pub fn ids(&self) -> Vec<usize> {
        self.entries.iter().map(|e| e.0).collect()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn top(&self) -> Option<(usize, f64)> {
        self.entries.first().copied()
    }

    /// 1-based rank of `id`.
    pub fn rank_of(&self, id: usize) -> Option<usize> {
        self.entries.iter().position(|e| e.0 == id).map(|p| p + 1)
    }

    pub fn truncate(&mut self, k: usize) {
        self.entries.truncate(k);
    }
}

pub fn rank_lexical(index: &Index, query: &[String], mode: LexicalMode) -> RankedList {
    let scores = (0..index.len())
        .map(|d| match mode {
            LexicalMode::Bm25 => index.bm25(query, d),
            LexicalMode::Tfidf => index.tfidf(query, d),
        })
        .collect();
    RankedList::from_scores(scores)
}

/// Unit-normalized embeddings of `texts`, in order.
pub fn embed_all(provider: &dyn EmbeddingProvider, texts: &[String]) -> Result<Vec<Vec<f64>>, ProviderError> {
    let out: Vec<Vec<f64>> = texts.par_iter().map(|t| unit(provider, t)).collect::<Result<_, _>>()?;
    if let Some(first) = out.first() {
        if let Some((i, _)) = out.iter().enumerate().find(|(_, v)| v.len() != first.len()) {
            return Err(ProviderError::new(&texts[i], "dimension mismatch"));
        }
    }
    Ok(out)
}

/// Ranks pre-normalized document vectors by cosine with a unit query.
pub fn rank_vectors(query: &[f64], docs: &[Vec<f64>]) -> RankedList {
    RankedList::from_scores(docs.iter().map(|d| vector::dot(query, d)).collect())
}

pub fn rank_embedding(provider: &dyn EmbeddingProvider, query: &str, docs: &[String]) -> Result<RankedList, ProviderError> {
    let q = unit(provider, query)?;
    let d = embed_all(provider, docs)?;
    if d.first().is_some_and(|v| v.len() != q.len()) {
        return Err(ProviderError::new(query, "dimension mismatch"));
    }
    Ok(rank_vectors(&q, &d))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QaPair {
    pub question: String,
    pub answer: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FaqQuery {
    pub query: String,
    pub gold: usize,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum QaLine {
    Pair(QaPair),
    Query(FaqQuery),
}

/// FAQ pairs and queries, each query with exactly one gold pair id
/// (position among the pairs).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct QaSet {
    pub pairs: Vec<QaPair>,
    pub queries: Vec<FaqQuery>,
}

impl QaSet {
    pub fn new(pairs: Vec<QaPair>, queries: Vec<FaqQuery>) -> Result<Self, RetrievalError> {
        let set = Self { pairs, queries };
        if let Some(q) = set.queries.iter().find(|q| q.gold >= set.pairs.len()) {
            return Err(RetrievalError::Argument(format!(
                "gold id {} out of range for {} pairs",
                q.gold,
                set.pairs.len()
            )));
        }
        Ok(set)
    }

    /// Lines are either `{"question","answer"}` or `{"query","gold"}`.
    pub fn parse_jsonl(text: &str) -> Result<Self, RetrievalError> {
        let mut pairs = Vec::new();
        let mut queries = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            match serde_json::from_str(line) {
                Ok(QaLine::Pair(p)) => pairs.push(p),
                Ok(QaLine::Query(q)) => queries.push(q),
                Err(e) => return Err(RetrievalError::Format { line: i + 1, reason: e.to_string() }),
            }
        }
        Self::new(pairs, queries)
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for p in &self.pairs {
            let _ = writeln!(out, "{}", serde_json::to_string(p).expect("serializable"));
        }
        for q in &self.queries {
            let _ = writeln!(out, "{}", serde_json::to_string(q).expect("serializable"));
        }
        out
    }

    pub fn questions(&self) -> Vec<String> {
        self.pairs.iter().map(|p| p.question.clone()).collect()
    }
}

/// Ranks the FAQ questions of a prepared collection against a query.
pub trait Ranker: Sync {
    fn rank(&self, query: &str) -> Result<RankedList, RetrievalError>;
}

impl<F> Ranker for F
where
    F: Fn(&str) -> Result<RankedList, RetrievalError> + Sync,
{
    fn rank(&self, query: &str) -> Result<RankedList, RetrievalError> {
        self(query)
    }
}

/// Query-question lexical similarity.
pub struct LexicalRanker {
    pub index: Index,
    pub mode: LexicalMode,
}

impl LexicalRanker {
    pub fn new(qa: &QaSet, mode: LexicalMode, tokens: TokenMode) -> Result<Self, RetrievalError> {
        Ok(Self {
            index: Index::from_texts(qa.questions(), tokens)?,
            mode,
        })
    }
}

impl Ranker for LexicalRanker {
    fn rank(&self, query: &str) -> Result<RankedList, RetrievalError> {
        Ok(rank_lexical(&self.index, &self.index.tokenize(query), self.mode))
    }
}

/// Query-question cosine similarity with question vectors embedded once.
pub struct EmbeddingRanker<'p> {
    provider: &'p dyn EmbeddingProvider,
    docs: Vec<Vec<f64>>,
}

impl<'p> EmbeddingRanker<'p> {
    pub fn new(provider: &'p dyn EmbeddingProvider, qa: &QaSet) -> Result<Self, RetrievalError> {
        Ok(Self {
            provider,
            docs: embed_all(provider, &qa.questions())?,
        })
    }
}

impl Ranker for EmbeddingRanker<'_> {
    fn rank(&self, query: &str) -> Result<RankedList, RetrievalError> {
        let q = unit(self.provider, query)?;
        if self.docs.first().is_some_and(|d| d.len() != q.len()) {
            return Err(ProviderError::new(query, "dimension mismatch").into());
        }
        Ok(rank_vectors(&q, &self.docs))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FaqRow {
    pub query_id: usize,
    pub top_doc: Option<usize>,
    pub score: f64,
    /// 1-based; `None` when the ranker did not return the gold pair.
    pub gold_rank: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FaqReport {
    pub acc: f64,
    pub mrr: f64,
    pub rows: Vec<FaqRow>,
}

impl FaqReport {
    /// `query_id, rank-1 doc id, score, gold rank` per query.
    pub fn results_tsv(&self) -> String {
        let mut out = String::from("query_id\ttop_doc\tscore\tgold_rank\n");
        for r in &self.rows {
            let top = r.top_doc.map_or("-".to_string(), |d| d.to_string());
            let rank = r.gold_rank.map_or("-".to_string(), |g| g.to_string());
            let _ = writeln!(out, "{}\t{}\t{:.6}\t{}", r.query_id, top, r.score, rank);
        }
        out
    }

    /// Method name, top-1 accuracy in percent, MRR.
    pub fn table_row(&self, method: &str) -> String {
        format!("{method}\t{:.1}\t{:.3}", 100.0 * self.acc, self.mrr)
    }

    pub const TABLE_HEADER: &'static str = "method\tacc\tmrr";
}

/// Top-1 accuracy and mean reciprocal rank of the gold question. A gold
/// pair missing from a ranking contributes reciprocal rank 0.
pub fn evaluate_faq(ranker: &dyn Ranker, qa: &QaSet) -> Result<FaqReport, RetrievalError> {
    if qa.queries.is_empty() {
        return Err(RetrievalError::Argument("no queries".into()));
    }
    let rows: Vec<FaqRow> = qa
        .queries
        .par_iter()
        .enumerate()
        .map(|(query_id, q)| {
            let list = ranker.rank(&q.query)?;
            let (top_doc, score) = list.top().map_or((None, 0.0), |(d, s)| (Some(d), s));
            Ok(FaqRow {
                query_id,
                top_doc,
                score,
                gold_rank: list.rank_of(q.gold),
            })
        })
        .collect::<Result<_, RetrievalError>>()?;
    let n = rows.len() as f64;
    let hits = rows.iter().filter(|r| r.gold_rank == Some(1)).count();
    let rr: f64 = rows.iter().map(|r| r.gold_rank.map_or(0.0, |g| 1.0 / g as f64)).sum();
    Ok(FaqReport {
        acc: hits as f64 / n,
        mrr: rr / n,
        rows,
    })
}

/// A generation template: 1 to 6 sentences and a category label.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Template {
    pub sentences: Vec<String>,
    pub category: String,
}

impl Template {
    pub fn new(sentences: Vec<String>, category: impl Into<String>) -> Result<Self, RetrievalError> {
        let t = Self {
            sentences,
            category: category.into(),
        };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<(), RetrievalError> {
        if (1..=MAX_TEMPLATE_SENTENCES).contains(&self.sentences.len()) {
            Ok(())
        } else {
            Err(RetrievalError::Argument(format!(
                "template has {} sentences (expected 1 to {MAX_TEMPLATE_SENTENCES})",
                self.sentences.len()
            )))
        }
    }
}

pub fn parse_templates_jsonl(text: &str) -> Result<Vec<Template>, RetrievalError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            let t: Template = serde_json::from_str(l).map_err(|e| RetrievalError::Format { line: i + 1, reason: e.to_string() })?;
            t.validate().map_err(|e| RetrievalError::Format { line: i + 1, reason: e.to_string() })?;
            Ok(t)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SentencePick {
    pub sentence: String,
    pub doc: usize,
    pub cosine: f64,
    /// 1-based position of `doc` in the BM25 ranking.
    pub bm25_rank: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TwoStageResult {
    pub category: String,
    pub k_requested: usize,
    pub k_used: usize,
    /// Set when `k_requested` exceeded the collection size.
    pub clamped: bool,
    pub picks: Vec<SentencePick>,
}

/// For each template sentence: BM25 top-k from `index`, re-ranked by cosine
/// between the sentence and document embeddings.
pub fn two_stage_retrieve(
    index: &Index,
    provider: &dyn EmbeddingProvider,
    template: &Template,
    k: usize,
) -> Result<TwoStageResult, RetrievalError> {
    two_stage(index, provider, None, template, k)
}

/// As [`two_stage_retrieve`], with document vectors from [`embed_all`]
/// over `index.texts()` computed once up front.
pub fn two_stage_retrieve_cached(
    index: &Index,
    provider: &dyn EmbeddingProvider,
    doc_vectors: &[Vec<f64>],
    template: &Template,
    k: usize,
) -> Result<TwoStageResult, RetrievalError> {
    if doc_vectors.len() != index.len() {
        return Err(RetrievalError::Argument(format!(
            "{} document vectors for {} documents",
            doc_vectors.len(),
            index.len()
        )));
    }
    two_stage(index, provider, Some(doc_vectors), template, k)
}

fn two_stage(
    index: &Index,
    provider: &dyn EmbeddingProvider,
    cache: Option<&[Vec<f64>]>,
    template: &Template,
    k: usize,
) -> Result<TwoStageResult, RetrievalError> {
    if k == 0 {
        return Err(RetrievalError::Argument("k must be at least 1".into()));
    }
    template.validate()?;
    let k_used = k.min(index.len());
    let picks = template
        .sentences
        .iter()
        .map(|s| {
            let mut lexical = rank_lexical(index, &index.tokenize(s), LexicalMode::Bm25);
            lexical.truncate(k_used);
            let q = unit(provider, s)?;
            let scored = lexical
                .entries()
                .iter()
                .map(|&(d, _)| {
                    let v = match cache {
                        Some(c) => c[d].clone(),
                        None => unit(provider, index.text(d))?,
                    };
                    if v.len() != q.len() {
                        return Err(ProviderError::new(index.text(d), "dimension mismatch"));
                    }
                    Ok((d, vector::dot(&q, &v)))
                })
                .collect::<Result<Vec<_>, _>>()?;
            let (doc, cosine) = RankedList::from_pairs(scored).top().expect("k_used >= 1");
            Ok(SentencePick {
                sentence: s.clone(),
                doc,
                cosine,
                bm25_rank: lexical.rank_of(doc).expect("re-ranked doc comes from the lexical list"),
            })
        })
        .collect::<Result<Vec<_>, RetrievalError>>()?;
    Ok(TwoStageResult {
        category: template.category.clone(),
        k_requested: k,
        k_used,
        clamped: k_used < k,
        picks,
    })
}
