//! Closed-vocabulary analogy datasets and their evaluation.
//!
//! A question `a : b :: c : ?` is answered by the candidate `d` maximizing
//! `cos(c + b - a, d)` over unit-normalized embeddings. Word-level candidate
//! sets are the top-k neighbours of `c + b - a` under a reference store with
//! the answer forced in; phrase and sentence questions are instantiated from
//! declarative templates.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{tokenize_text, TokenMode};
use crate::vector;

#[derive(Debug, Error)]
pub enum AnalogyError {
    #[error("analogy: {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("analogy: line {line}: {reason}")]
    Format { line: usize, reason: String },
    #[error("analogy: template {index}: {reason}")]
    Template { index: usize, reason: String },
    #[error("analogy: invalid argument: {0}")]
    Argument(String),
    #[error("analogy: {0}")]
    Provider(#[from] ProviderError),
}

/// Failure to embed one sequence.
#[derive(Debug, Clone, Error, PartialEq)]
#[error("cannot embed {text:?}: {reason}")]
pub struct ProviderError {
    pub text: String,
    pub reason: String,
}

impl ProviderError {
    pub fn new(text: &str, reason: impl Into<String>) -> Self {
        Self {
            text: text.to_string(),
            reason: reason.into(),
        }
    }
}

/// Anything that maps a sequence of text to a vector. Implementations must
/// be usable from several threads at once.
pub trait EmbeddingProvider: Sync {
    fn embed(&self, text: &str) -> Result<Vec<f64>, ProviderError>;
}

impl<F> EmbeddingProvider for F
where
    F: Fn(&str) -> Result<Vec<f64>, ProviderError> + Sync,
{
    fn embed(&self, text: &str) -> Result<Vec<f64>, ProviderError> {
        self(text)
    }
}

pub(crate) fn unit(provider: &dyn EmbeddingProvider, text: &str) -> Result<Vec<f64>, ProviderError> {
    let v = provider.embed(text)?;
    vector::normalized(&v).ok_or_else(|| ProviderError::new(text, "zero or non-finite vector"))
}

/// Word vectors keyed by sequence string, in file order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EmbeddingStore {
    dim: usize,
    words: Vec<String>,
    vectors: Vec<Vec<f64>>,
    index: HashMap<String, usize>,
}

impl EmbeddingStore {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            ..Default::default()
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    /// Inserts or replaces a vector.
    pub fn insert(&mut self, word: impl Into<String>, v: Vec<f64>) -> Result<(), AnalogyError> {
        if v.len() != self.dim {
            return Err(AnalogyError::Argument(format!(
                "vector of dimension {} in a store of dimension {}",
                v.len(),
                self.dim
            )));
        }
        let word = word.into();
        match self.index.get(&word) {
            Some(&i) => self.vectors[i] = v,
            None => {
                self.index.insert(word.clone(), self.words.len());
                self.words.push(word);
                self.vectors.push(v);
            }
        }
        Ok(())
    }

    pub fn get(&self, word: &str) -> Option<&[f64]> {
        self.index.get(word).map(|&i| self.vectors[i].as_slice())
    }

    pub fn contains(&self, word: &str) -> bool {
        self.index.contains_key(word)
    }

    /// Unit-normalizes every non-zero vector.
    pub fn normalize(&mut self) {
        for v in &mut self.vectors {
            vector::normalize(v);
        }
    }

    /// Keeps only the first `n` entries.
    pub fn truncate(&mut self, n: usize) {
        for w in self.words.drain(n.min(self.words.len())..) {
            self.index.remove(&w);
        }
        self.vectors.truncate(n);
    }

    /// Parses `token v1 .. vD` lines. A leading `count dim` header line, as
    /// written by word2vec, is skipped.
    pub fn parse(text: &str, normalize: bool) -> Result<Self, AnalogyError> {
        let mut store: Option<EmbeddingStore> = None;
        for (i, line) in text.lines().enumerate() {
            let line_no = i + 1;
            let mut fields = line.split_whitespace();
            let Some(word) = fields.next() else { continue };
            let values: Vec<&str> = fields.collect();
            if i == 0 && values.len() == 1 && word.parse::<usize>().is_ok() && values[0].parse::<usize>().is_ok() {
                continue;
            }
            let v = values
                .iter()
                .map(|s| s.parse::<f64>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| AnalogyError::Format { line: line_no, reason: e.to_string() })?;
            if v.is_empty() {
                return Err(AnalogyError::Format { line: line_no, reason: "no vector components".into() });
            }
            let s = store.get_or_insert_with(|| EmbeddingStore::new(v.len()));
            if v.len() != s.dim {
                return Err(AnalogyError::Format {
                    line: line_no,
                    reason: format!("expected {} components, found {}", s.dim, v.len()),
                });
            }
            s.insert(word, v)?;
        }
        let mut store = store.unwrap_or_default();
        if normalize {
            store.normalize();
        }
        Ok(store)
    }
}

/// Reads a whitespace-separated word-vector text file.
pub fn load_word_vectors(path: impl AsRef<Path>, normalize: bool) -> Result<EmbeddingStore, AnalogyError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| AnalogyError::Io {
        path: path.display().to_string(),
        source,
    })?;
    EmbeddingStore::parse(&text, normalize)
}

impl EmbeddingProvider for EmbeddingStore {
    fn embed(&self, text: &str) -> Result<Vec<f64>, ProviderError> {
        self.get(text)
            .map(<[f64]>::to_vec)
            .ok_or_else(|| ProviderError::new(text, "not in vector store"))
    }
}

/// Bag-of-words provider: the average of the stored vectors of the words in
/// a sequence (unknown words skipped).
pub struct MeanOfWords<'a> {
    pub store: &'a EmbeddingStore,
    pub mode: TokenMode,
}

impl EmbeddingProvider for MeanOfWords<'_> {
    fn embed(&self, text: &str) -> Result<Vec<f64>, ProviderError> {
        if let Some(v) = self.store.get(text) {
            return Ok(v.to_vec());
        }
        let mut sum = vec![0.0; self.store.dim()];
        let mut found = 0usize;
        for tok in tokenize_text(text, self.mode) {
            if let Some(v) = self.store.get(&tok) {
                sum.iter_mut().zip(v).for_each(|(s, x)| *s += x);
                found += 1;
            }
        }
        if found == 0 {
            return Err(ProviderError::new(text, "no known words"));
        }
        sum.iter_mut().for_each(|s| *s /= found as f64);
        Ok(sum)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Category {
    CapitalCommon,
    CapitalWorld,
    CityState,
    MaleFemale,
    CountryCurrency,
    PresentParticiple,
    PositiveComparative,
    PositiveNegative,
    Other(String),
}

impl Category {
    /// Maps both the short names and the section names of the standard
    /// word analogy file.
    pub fn parse(name: &str) -> Self {
        match name.trim() {
            "capital-common" | "capital-common-countries" => Self::CapitalCommon,
            "capital-world" => Self::CapitalWorld,
            "city-state" | "city-in-state" => Self::CityState,
            "male-female" | "family" => Self::MaleFemale,
            "country-currency" | "currency" => Self::CountryCurrency,
            "present-participle" | "gram5-present-participle" => Self::PresentParticiple,
            "positive-comparative" | "gram3-comparative" => Self::PositiveComparative,
            "positive-negative" | "gram2-opposite" => Self::PositiveNegative,
            other => Self::Other(other.to_string()),
        }
    }

    pub fn name(&self) -> &str {
        match self {
            Self::CapitalCommon => "capital-common",
            Self::CapitalWorld => "capital-world",
            Self::CityState => "city-state",
            Self::MaleFemale => "male-female",
            Self::CountryCurrency => "country-currency",
            Self::PresentParticiple => "present-participle",
            Self::PositiveComparative => "positive-comparative",
            Self::PositiveNegative => "positive-negative",
            Self::Other(name) => name,
        }
    }

    /// Capital, city, currency and gender relations are semantic; tense,
    /// comparative, negation and every `gram*` section are syntactic.
    pub fn is_semantic(&self) -> bool {
        match self {
            Self::CapitalCommon | Self::CapitalWorld | Self::CityState | Self::MaleFemale | Self::CountryCurrency => true,
            Self::PresentParticiple | Self::PositiveComparative | Self::PositiveNegative => false,
            Self::Other(name) => !name.starts_with("gram"),
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl Serialize for Category {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.name())
    }
}

impl<'de> Deserialize<'de> for Category {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        Ok(Category::parse(&String::deserialize(d)?))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    Word,
    Phrase,
    Sentence,
}

impl Level {
    pub const ALL: [Level; 3] = [Level::Word, Level::Phrase, Level::Sentence];

    pub fn name(&self) -> &'static str {
        match self {
            Level::Word => "word",
            Level::Phrase => "phrase",
            Level::Sentence => "sentence",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnalogyQuestion {
    pub a: String,
    pub b: String,
    pub c: String,
    pub candidates: Vec<String>,
    #[serde(rename = "answer")]
    pub answer_index: usize,
    pub category: Category,
    pub level: Level,
}

impl AnalogyQuestion {
    pub fn answer(&self) -> &str {
        &self.candidates[self.answer_index]
    }

    /// Answer in range, no duplicate candidates, cue sequences excluded.
    pub fn is_well_formed(&self) -> bool {
        let distinct: HashSet<&String> = self.candidates.iter().collect();
        self.answer_index < self.candidates.len()
            && distinct.len() == self.candidates.len()
            && ![&self.a, &self.b, &self.c].iter().any(|x| distinct.contains(x))
    }
}

pub fn questions_to_jsonl(questions: &[AnalogyQuestion]) -> String {
    let mut out = String::new();
    for q in questions {
        let _ = writeln!(out, "{}", serde_json::to_string(q).expect("serializable"));
    }
    out
}

pub fn parse_questions_jsonl(text: &str) -> Result<Vec<AnalogyQuestion>, AnalogyError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            let q: AnalogyQuestion = serde_json::from_str(l)
                .map_err(|e| AnalogyError::Format { line: i + 1, reason: e.to_string() })?;
            if !q.is_well_formed() {
                return Err(AnalogyError::Format { line: i + 1, reason: "malformed question".into() });
            }
            Ok(q)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Quadruple {
    pub category: Category,
    pub a: String,
    pub b: String,
    pub c: String,
    pub d: String,
}

/// Parses the standard analogy text format: `: section` headers followed by
/// four whitespace-separated words per line.
pub fn parse_quadruples(text: &str, lowercase: bool) -> Result<Vec<Quadruple>, AnalogyError> {
    let mut category = None;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(header) = line.strip_prefix(':') {
            category = Some(Category::parse(header));
            continue;
        }
        let words: Vec<String> = line
            .split_whitespace()
            .map(|w| if lowercase { w.to_lowercase() } else { w.to_string() })
            .collect();
        let [a, b, c, d]: [String; 4] = words.try_into().map_err(|_| AnalogyError::Format {
            line: i + 1,
            reason: "expected four words".into(),
        })?;
        let category = category.clone().ok_or_else(|| AnalogyError::Format {
            line: i + 1,
            reason: "question before any ': category' header".into(),
        })?;
        out.push(Quadruple { category, a, b, c, d });
    }
    Ok(out)
}

/// Reference store prepared for nearest-neighbour ranking.
struct Neighbours<'a> {
    store: &'a EmbeddingStore,
    unit: Vec<Vec<f64>>,
}

impl<'a> Neighbours<'a> {
    fn new(store: &'a EmbeddingStore) -> Self {
        let unit = store
            .vectors
            .iter()
            .map(|v| vector::normalized(v).unwrap_or_else(|| vec![0.0; v.len()]))
            .collect();
        Self { store, unit }
    }

    fn unit_of(&self, word: &str) -> Option<&[f64]> {
        self.store.index.get(word).map(|&i| self.unit[i].as_slice())
    }

    /// Top-k words (excluding a, b, c) by cosine with `c + b - a`, with `d`
    /// forced into the last slot when missed. `None` if any word is unknown.
    fn candidates(&self, a: &str, b: &str, c: &str, d: &str, k: usize) -> Option<(Vec<String>, usize)> {
        let (va, vb, vc) = (self.unit_of(a)?, self.unit_of(b)?, self.unit_of(c)?);
        self.unit_of(d)?;
        let target: Vec<f64> = (0..va.len()).map(|i| vc[i] + vb[i] - va[i]).collect();
        let tn = vector::norm(&target);
        let mut scored: Vec<(f64, usize)> = self
            .unit
            .iter()
            .enumerate()
            .filter(|(i, _)| {
                let w = self.store.words[*i].as_str();
                w != a && w != b && w != c
            })
            .map(|(i, v)| (if tn > 0.0 { vector::dot(&target, v) / tn } else { 0.0 }, i))
            .collect();
        let by_score = |x: &(f64, usize), y: &(f64, usize)| y.0.total_cmp(&x.0).then(x.1.cmp(&y.1));
        if scored.len() > k {
            scored.select_nth_unstable_by(k - 1, by_score);
            scored.truncate(k);
        }
        scored.sort_by(by_score);
        let mut words: Vec<String> = scored.iter().map(|&(_, i)| self.store.words[i].clone()).collect();
        let answer = match words.iter().position(|w| w == d) {
            Some(p) => p,
            None => {
                let last = words.len() - 1;
                words[last] = d.to_string();
                last
            }
        };
        Some((words, answer))
    }
}

/// Questions plus the number of quadruples that could not be instantiated
/// (unknown words, missing forms, cue collisions).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AnalogyDataset {
    pub questions: Vec<AnalogyQuestion>,
    pub skipped: usize,
}

/// Word-level questions with `k` negative-sampled candidates each.
pub fn build_word_questions(
    quads: &[Quadruple],
    reference: &EmbeddingStore,
    k: usize,
) -> Result<AnalogyDataset, AnalogyError> {
    if k < 2 {
        return Err(AnalogyError::Argument("k must be at least 2".into()));
    }
    if reference.len() < k + 3 {
        return Err(AnalogyError::Argument(format!(
            "reference store has {} words, need at least k + 3 = {}",
            reference.len(),
            k + 3
        )));
    }
    let nb = Neighbours::new(reference);
    let built: Vec<Option<AnalogyQuestion>> = quads
        .par_iter()
        .map(|q| {
            nb.candidates(&q.a, &q.b, &q.c, &q.d, k).map(|(candidates, answer_index)| AnalogyQuestion {
                a: q.a.clone(),
                b: q.b.clone(),
                c: q.c.clone(),
                candidates,
                answer_index,
                category: q.category.clone(),
                level: Level::Word,
            })
        })
        .collect();
    let skipped = built.iter().filter(|q| q.is_none()).count();
    Ok(AnalogyDataset {
        questions: built.into_iter().flatten().collect(),
        skipped,
    })
}

const SLOT: &str = "{w}";

/// Where a template's wrong candidates come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "lowercase")]
pub enum Distractors {
    /// Word-level negative sampling against the reference store, each
    /// candidate word placed into the frame.
    Reference { k: usize },
    /// Alternative surface forms of the answer word (e.g. superlative for a
    /// comparative answer).
    Forms { forms: BTreeMap<String, Vec<String>> },
}

/// Phrase or sentence template. `a` and `d` use `frame`; `b` and `c` use
/// the frame after applying `synonyms`, with fillers rewritten through
/// `paraphrases`, so the answer cannot be found by word overlap alone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Template {
    pub category: Category,
    pub level: Level,
    pub frame: String,
    pub synonyms: Vec<(String, String)>,
    #[serde(default)]
    pub paraphrases: BTreeMap<String, String>,
    pub distractors: Distractors,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemplateSet {
    pub templates: Vec<Template>,
}

impl TemplateSet {
    pub fn parse(text: &str) -> Result<Self, AnalogyError> {
        let set: TemplateSet = serde_json::from_str(text).map_err(|e| AnalogyError::Format {
            line: e.line(),
            reason: e.to_string(),
        })?;
        set.validate()?;
        Ok(set)
    }

    pub fn validate(&self) -> Result<(), AnalogyError> {
        for (index, t) in self.templates.iter().enumerate() {
            let err = |reason: &str| {
                Err(AnalogyError::Template {
                    index,
                    reason: reason.to_string(),
                })
            };
            if t.frame.matches(SLOT).count() != 1 {
                return err("frame needs exactly one {w} slot");
            }
            if t.level == Level::Word {
                return err("templates are for phrase or sentence level");
            }
            if t.category == Category::CountryCurrency {
                return err("country-currency is word-level only");
            }
            if t.synonyms.is_empty() {
                return err("at least one synonym substitution is required");
            }
            if let Some((from, _)) = t.synonyms.iter().find(|(from, _)| from.is_empty() || !t.frame.contains(from.as_str())) {
                return err(&format!("synonym source {from:?} does not occur in frame"));
            }
            if t.frame == t.paraphrased_frame() {
                return err("synonym substitution leaves the frame unchanged");
            }
            match &t.distractors {
                Distractors::Reference { k } if *k < 2 => return err("reference distractors need k >= 2"),
                Distractors::Forms { forms } if forms.is_empty() => return err("forms table is empty"),
                _ => {}
            }
        }
        Ok(())
    }
}

impl Template {
    fn paraphrased_frame(&self) -> String {
        self.synonyms
            .iter()
            .fold(self.frame.clone(), |acc, (from, to)| acc.replace(from.as_str(), to))
    }

    fn fill(frame: &str, word: &str) -> String {
        frame.replacen(SLOT, word, 1)
    }

    fn paraphrase<'a>(&'a self, word: &'a str) -> &'a str {
        self.paraphrases.get(word).map(String::as_str).unwrap_or(word)
    }

    fn instantiate(&self, q: &Quadruple, nb: &Neighbours<'_>) -> Option<AnalogyQuestion> {
        let alt = self.paraphrased_frame();
        let a = Self::fill(&self.frame, &q.a);
        let b = Self::fill(&alt, self.paraphrase(&q.b));
        let c = Self::fill(&alt, self.paraphrase(&q.c));
        let (words, answer_index) = match &self.distractors {
            Distractors::Reference { k } => nb.candidates(&q.a, &q.b, &q.c, &q.d, *k)?,
            Distractors::Forms { forms } => {
                let mut words: Vec<String> = forms.get(&q.d)?.iter().filter(|w| **w != q.d).cloned().collect();
                if words.is_empty() {
                    return None;
                }
                words.push(q.d.clone());
                words.sort();
                words.dedup();
                let answer = words.iter().position(|w| *w == q.d)?;
                (words, answer)
            }
        };
        let candidates: Vec<String> = words.iter().map(|w| Self::fill(&self.frame, w)).collect();
        let question = AnalogyQuestion {
            a,
            b,
            c,
            candidates,
            answer_index,
            category: q.category.clone(),
            level: self.level,
        };
        question.is_well_formed().then_some(question)
    }
}

/// Phrase/sentence questions from every template whose category matches a
/// quadruple's category.
pub fn build_template_questions(
    quads: &[Quadruple],
    templates: &TemplateSet,
    reference: &EmbeddingStore,
) -> Result<AnalogyDataset, AnalogyError> {
    templates.validate()?;
    let nb = Neighbours::new(reference);
    let mut out = AnalogyDataset::default();
    for t in &templates.templates {
        for q in quads.iter().filter(|q| q.category == t.category) {
            match t.instantiate(q, &nb) {
                Some(question) => out.questions.push(question),
                None => out.skipped += 1,
            }
        }
    }
    Ok(out)
}

/// Word-level questions for every quadruple, followed by template-derived
/// phrase and sentence questions when `templates` is given.
pub fn build_analogy_dataset(
    quads: &[Quadruple],
    templates: Option<&TemplateSet>,
    reference: &EmbeddingStore,
    k: usize,
) -> Result<AnalogyDataset, AnalogyError> {
    let mut data = build_word_questions(quads, reference, k)?;
    if let Some(t) = templates {
        let extra = build_template_questions(quads, t, reference)?;
        data.questions.extend(extra.questions);
        data.skipped += extra.skipped;
    }
    Ok(data)
}

/// Index of the candidate maximizing `cos(c + b - a, d)`; ties go to the
/// lowest index.
pub fn solve_analogy(provider: &dyn EmbeddingProvider, q: &AnalogyQuestion) -> Result<usize, ProviderError> {
    let a = unit(provider, &q.a)?;
    let b = unit(provider, &q.b)?;
    let c = unit(provider, &q.c)?;
    if a.len() != b.len() || a.len() != c.len() {
        return Err(ProviderError::new(&q.c, "dimension mismatch"));
    }
    let target: Vec<f64> = (0..a.len()).map(|i| c[i] + b[i] - a[i]).collect();
    let mut best = (0, f64::NEG_INFINITY);
    for (i, cand) in q.candidates.iter().enumerate() {
        let d = unit(provider, cand)?;
        if d.len() != target.len() {
            return Err(ProviderError::new(cand, "dimension mismatch"));
        }
        let score = vector::cosine(&target, &d);
        if score > best.1 {
            best = (i, score);
        }
    }
    Ok(best.0)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CategoryScore {
    pub level: Level,
    pub category: Category,
    pub correct: usize,
    pub total: usize,
}

impl CategoryScore {
    pub fn accuracy(&self) -> f64 {
        self.correct as f64 / self.total as f64
    }
}

/// One level's columns: semantic and syntactic accuracy pooled over their
/// questions, and their unweighted mean.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevelScore {
    pub level: Level,
    pub semantic: Option<f64>,
    pub syntactic: Option<f64>,
    pub correct: usize,
    pub total: usize,
}

impl LevelScore {
    pub fn avg(&self) -> Option<f64> {
        match (self.semantic, self.syntactic) {
            (Some(a), Some(b)) => Some((a + b) / 2.0),
            (a, b) => a.or(b),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnalogyReport {
    pub categories: Vec<CategoryScore>,
    pub levels: Vec<LevelScore>,
    pub questions: usize,
    pub correct: usize,
}

impl AnalogyReport {
    /// Fraction of all questions answered correctly.
    pub fn micro_accuracy(&self) -> f64 {
        self.correct as f64 / self.questions as f64
    }

    /// Mean of the per-level averages over levels that have questions.
    pub fn overall(&self) -> f64 {
        let avgs: Vec<f64> = self.levels.iter().filter_map(LevelScore::avg).collect();
        avgs.iter().sum::<f64>() / avgs.len() as f64
    }

    pub fn level(&self, level: Level) -> Option<&LevelScore> {
        self.levels.iter().find(|l| l.level == level)
    }

    pub fn category(&self, level: Level, category: &Category) -> Option<&CategoryScore> {
        self.categories.iter().find(|c| c.level == level && &c.category == category)
    }

    /// One header and one row: semantic / syntactic / avg per level, then
    /// the overall average, as percentages.
    pub fn to_tsv(&self, model: &str) -> String {
        let pct = |x: Option<f64>| x.map_or("-".to_string(), |v| format!("{:.1}", 100.0 * v));
        let mut header = vec!["model".to_string()];
        let mut row = vec![model.to_string()];
        for level in Level::ALL {
            for col in ["semantic", "syntactic", "avg"] {
                header.push(format!("{}_{col}", level.name()));
            }
            let l = self.level(level);
            row.push(pct(l.and_then(|l| l.semantic)));
            row.push(pct(l.and_then(|l| l.syntactic)));
            row.push(pct(l.and_then(LevelScore::avg)));
        }
        header.push("avg".into());
        row.push(pct(Some(self.overall())));
        format!("{}\n{}\n", header.join("\t"), row.join("\t"))
    }

    pub fn categories_tsv(&self) -> String {
        let mut out = String::from("level\tcategory\tcorrect\ttotal\taccuracy\n");
        for c in &self.categories {
            let _ = writeln!(out, "{}\t{}\t{}\t{}\t{:.4}", c.level.name(), c.category, c.correct, c.total, c.accuracy());
        }
        out
    }
}

/// Per-question correctness, in dataset order.
pub fn score_questions(provider: &dyn EmbeddingProvider, dataset: &[AnalogyQuestion]) -> Result<Vec<bool>, ProviderError> {
    dataset
        .par_iter()
        .map(|q| solve_analogy(provider, q).map(|i| i == q.answer_index))
        .collect()
}

pub fn evaluate_analogy(provider: &dyn EmbeddingProvider, dataset: &[AnalogyQuestion]) -> Result<AnalogyReport, AnalogyError> {
    if dataset.is_empty() {
        return Err(AnalogyError::Argument("empty analogy dataset".into()));
    }
    let hits = score_questions(provider, dataset)?;
    let mut per_cat: BTreeMap<(Level, Category), (usize, usize)> = BTreeMap::new();
    for (q, &hit) in dataset.iter().zip(&hits) {
        let e = per_cat.entry((q.level, q.category.clone())).or_default();
        e.0 += hit as usize;
        e.1 += 1;
    }
    let categories: Vec<CategoryScore> = per_cat
        .into_iter()
        .map(|((level, category), (correct, total))| CategoryScore { level, category, correct, total })
        .collect();
    let levels = Level::ALL
        .iter()
        .filter_map(|&level| {
            let pooled = |semantic: bool| {
                let (c, t) = categories
                    .iter()
                    .filter(|s| s.level == level && s.category.is_semantic() == semantic)
                    .fold((0, 0), |(c, t), s| (c + s.correct, t + s.total));
                (t > 0).then(|| c as f64 / t as f64)
            };
            let (correct, total) = categories
                .iter()
                .filter(|s| s.level == level)
                .fold((0, 0), |(c, t), s| (c + s.correct, t + s.total));
            (total > 0).then(|| LevelScore {
                level,
                semantic: pooled(true),
                syntactic: pooled(false),
                correct,
                total,
            })
        })
        .collect();
    let correct = hits.iter().filter(|&&h| h).count();
    Ok(AnalogyReport {
        categories,
        levels,
        questions: dataset.len(),
        correct,
    })
}
