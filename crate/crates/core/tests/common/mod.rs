//! Fixtures and independent reference implementations shared by the
//! integration tests and the acceptance harness.
#![allow(dead_code)]

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap};

use num_bigint::BigUint;
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use unirep::analogy::{AnalogyQuestion, Category, Level, ProviderError};
use unirep::masking::MaskedInstance;
use unirep::mlm::{ModelParams, TokenVocab};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn words(s: &str) -> Vec<String> {
    s.split_whitespace().map(String::from).collect()
}

/// `len` tokens drawn uniformly from `t0 .. t{alphabet-1}`.
pub fn random_tokens(r: &mut impl Rng, len: usize, alphabet: usize) -> Vec<String> {
    (0..len).map(|_| format!("t{}", r.random_range(0..alphabet))).collect()
}

/// Random tokens with length drawn from `lens` and alphabet size from `alphabets`.
pub fn random_doc(r: &mut impl Rng, lens: std::ops::Range<usize>, alphabets: std::ops::Range<usize>) -> Vec<String> {
    let len = r.random_range(lens);
    let alphabet = r.random_range(alphabets);
    random_tokens(r, len, alphabet)
}

// ---------------------------------------------------------------- n-grams

/// One scored n-gram with its exact PMI ratio `num/den` (PMI is
/// `ln(num/den) / len`).
#[derive(Debug, Clone)]
pub struct OracleEntry {
    pub tokens: Vec<String>,
    pub count: usize,
    pub pmi: f64,
    num: BigUint,
    den: BigUint,
}

/// Exact ranking: PMI descending (compared as `R_a^(L_b)` against
/// `R_b^(L_a)` in big integers), count descending, tokens ascending.
pub fn oracle_rank(a: &OracleEntry, b: &OracleEntry) -> Ordering {
    let (la, lb) = (a.tokens.len() as u32, b.tokens.len() as u32);
    let lhs = a.num.pow(lb) * b.den.pow(la);
    let rhs = b.num.pow(la) * a.den.pow(lb);
    rhs.cmp(&lhs)
        .then_with(|| b.count.cmp(&a.count))
        .then_with(|| a.tokens.cmp(&b.tokens))
}

/// Brute-force n-gram counts of lengths `1..=max_n`.
pub fn oracle_counts(doc: &[String], max_n: usize) -> BTreeMap<Vec<String>, usize> {
    let mut counts = BTreeMap::new();
    for start in 0..doc.len() {
        for n in 1..=max_n {
            if start + n > doc.len() {
                break;
            }
            *counts.entry(doc[start..start + n].to_vec()).or_insert(0) += 1;
        }
    }
    counts
}

/// Every n-gram of length `min_len..=max_n` in `doc`, scored and sorted.
pub fn oracle_score_document(doc: &[String], max_n: usize, min_len: usize) -> Vec<OracleEntry> {
    let counts = oracle_counts(doc, max_n);
    let total = doc.len();
    let mut out: Vec<OracleEntry> = counts
        .iter()
        .filter(|(g, _)| g.len() >= min_len)
        .map(|(g, &c)| {
            let mut num = BigUint::from(c);
            for _ in 1..g.len() {
                num *= total;
            }
            let mut den = BigUint::from(1u32);
            let mut logs = 0.0;
            for t in g {
                let u = counts[std::slice::from_ref(t)];
                den *= u;
                logs += (u as f64 / total as f64).ln();
            }
            let pmi = ((c as f64 / total as f64).ln() - logs) / g.len() as f64;
            OracleEntry { tokens: g.clone(), count: c, pmi, num, den }
        })
        .collect();
    out.sort_by(oracle_rank);
    out
}

/// Per-document top-k, merged by keeping the best-ranked entry per n-gram.
pub fn oracle_vocab(docs: &[Vec<String>], max_n: usize, top_k: usize, min_len: usize) -> BTreeMap<Vec<String>, OracleEntry> {
    let mut merged: BTreeMap<Vec<String>, OracleEntry> = BTreeMap::new();
    for doc in docs {
        let mut scored = oracle_score_document(doc, max_n, min_len);
        scored.truncate(top_k);
        for e in scored {
            match merged.get(&e.tokens) {
                Some(old) if oracle_rank(old, &e) != Ordering::Greater => {}
                _ => {
                    merged.insert(e.tokens.clone(), e);
                }
            }
        }
    }
    merged
}

// --------------------------------------------------------------- training

/// 200 short sentences built from a few fixed multi-word expressions.
pub fn toy_sentences(seed: u64) -> Vec<Vec<String>> {
    let subjects = ["the old cat", "a small dog", "my best friend", "the tall man"];
    let verbs = ["visited", "liked", "remembered"];
    let objects = ["new york city", "san francisco", "the red car", "ice cream"];
    let tails = ["last week", "every summer", "at night"];
    let mut r = rng(seed);
    (0..200)
        .map(|_| {
            let parts = [
                *subjects.choose(&mut r).unwrap(),
                *verbs.choose(&mut r).unwrap(),
                *objects.choose(&mut r).unwrap(),
                *tails.choose(&mut r).unwrap(),
            ];
            words(&parts.join(" "))
        })
        .collect()
}

// ------------------------------------------------------- reference encoder

fn slot_mat(p: &[f64], s: &unirep::mlm::Slot) -> Vec<Vec<f64>> {
    (0..s.rows).map(|r| p[s.offset + r * s.cols..s.offset + (r + 1) * s.cols].to_vec()).collect()
}

fn slot_vec(p: &[f64], s: &unirep::mlm::Slot) -> Vec<f64> {
    p[s.offset..s.offset + s.cols].to_vec()
}

fn matmul(x: &[Vec<f64>], w: &[Vec<f64>], b: &[f64]) -> Vec<Vec<f64>> {
    x.iter()
        .map(|row| {
            (0..b.len())
                .map(|j| b[j] + (0..row.len()).map(|i| row[i] * w[i][j]).sum::<f64>())
                .collect()
        })
        .collect()
}

fn layer_norm(x: &[Vec<f64>], g: &[f64], b: &[f64]) -> Vec<Vec<f64>> {
    x.iter()
        .map(|row| {
            let d = row.len() as f64;
            let mean = row.iter().sum::<f64>() / d;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / d;
            let inv = 1.0 / (var + 1e-12).sqrt();
            row.iter().enumerate().map(|(j, v)| (v - mean) * inv * g[j] + b[j]).collect()
        })
        .collect()
}

fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + ((2.0 / std::f64::consts::PI).sqrt() * (x + 0.044715 * x.powi(3))).tanh())
}

fn add(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    a.iter().zip(b).map(|(x, y)| x.iter().zip(y).map(|(u, v)| u + v).collect()).collect()
}

/// Scalar, loop-only forward pass of the encoder.
pub fn reference_hidden(params: &ModelParams, ids: &[usize]) -> Vec<Vec<f64>> {
    let cfg = params.config();
    let lay = params.layout();
    let p = params.values();
    let tok = slot_mat(p, &lay.tok_emb);
    let pos = slot_mat(p, &lay.pos_emb);
    let x0: Vec<Vec<f64>> = ids
        .iter()
        .enumerate()
        .map(|(i, &id)| tok[id].iter().zip(&pos[i]).map(|(a, b)| a + b).collect())
        .collect();
    let mut x = layer_norm(&x0, &slot_vec(p, &lay.emb_ln_gamma), &slot_vec(p, &lay.emb_ln_beta));
    let dh = cfg.d_model / cfg.heads;
    for l in &lay.layers {
        let q = matmul(&x, &slot_mat(p, &l.wq), &slot_vec(p, &l.bq));
        let k = matmul(&x, &slot_mat(p, &l.wk), &slot_vec(p, &l.bk));
        let v = matmul(&x, &slot_mat(p, &l.wv), &slot_vec(p, &l.bv));
        let n = x.len();
        let mut ctx = vec![vec![0.0; cfg.d_model]; n];
        for h in 0..cfg.heads {
            let cols = h * dh..(h + 1) * dh;
            for i in 0..n {
                let scores: Vec<f64> = (0..n)
                    .map(|j| cols.clone().map(|c| q[i][c] * k[j][c]).sum::<f64>() / (dh as f64).sqrt())
                    .collect();
                let m = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let e: Vec<f64> = scores.iter().map(|s| (s - m).exp()).collect();
                let z: f64 = e.iter().sum();
                for c in cols.clone() {
                    ctx[i][c] = (0..n).map(|j| e[j] / z * v[j][c]).sum();
                }
            }
        }
        let attn = matmul(&ctx, &slot_mat(p, &l.wo), &slot_vec(p, &l.bo));
        let h1 = layer_norm(&add(&x, &attn), &slot_vec(p, &l.ln1_gamma), &slot_vec(p, &l.ln1_beta));
        let pre = matmul(&h1, &slot_mat(p, &l.w1), &slot_vec(p, &l.b1));
        let act: Vec<Vec<f64>> = pre.iter().map(|r| r.iter().map(|&v| gelu(v)).collect()).collect();
        let ff = matmul(&act, &slot_mat(p, &l.w2), &slot_vec(p, &l.b2));
        x = layer_norm(&add(&h1, &ff), &slot_vec(p, &l.ln2_gamma), &slot_vec(p, &l.ln2_beta));
    }
    x
}

/// Mean target-token negative log-likelihood, computed from
/// [`reference_hidden`] with the tied output projection.
pub fn reference_loss(params: &ModelParams, vocab: &TokenVocab, inst: &MaskedInstance) -> f64 {
    let ids = vocab.ids(&inst.input).unwrap();
    let h = reference_hidden(params, &ids);
    let p = params.values();
    let lay = params.layout();
    let emb = slot_mat(p, &lay.tok_emb);
    let bias = slot_vec(p, &lay.out_bias);
    let mut total = 0.0;
    let mut n = 0;
    for t in &inst.targets {
        for (pos, tok) in t.span.range().zip(&t.tokens) {
            let logits: Vec<f64> = emb
                .iter()
                .zip(&bias)
                .map(|(e, b)| b + e.iter().zip(&h[pos]).map(|(x, y)| x * y).sum::<f64>())
                .collect();
            let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lse = m + logits.iter().map(|z| (z - m).exp()).sum::<f64>().ln();
            total += lse - logits[vocab.id(tok).unwrap()];
            n += 1;
        }
    }
    if n == 0 {
        0.0
    } else {
        total / n as f64
    }
}

/// `|a - n| / max(|a|, |n|, 1e-6)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6)
}

// -------------------------------------------------------------- analogies

/// Questions whose answer is exactly `c + b - a` in a random store; the
/// store is returned as a closure-backed lookup table.
pub fn exact_linear_dataset(seed: u64, n: usize, k: usize, dim: usize) -> (HashMap<String, Vec<f64>>, Vec<AnalogyQuestion>) {
    let mut r = rng(seed);
    let mut table = HashMap::new();
    let gauss = |r: &mut ChaCha8Rng| -> Vec<f64> { (0..dim).map(|_| r.random_range(-1.0..1.0)).collect() };
    let mut questions = Vec::new();
    for q in 0..n {
        let (a, b, c) = (gauss(&mut r), gauss(&mut r), gauss(&mut r));
        let d: Vec<f64> = (0..dim).map(|i| c[i] + b[i] - a[i]).collect();
        let name = |s: &str| format!("q{q}_{s}");
        table.insert(name("a"), a);
        table.insert(name("b"), b);
        table.insert(name("c"), c);
        let answer = r.random_range(0..k);
        let mut candidates = Vec::new();
        for i in 0..k {
            let w = name(&format!("d{i}"));
            table.insert(w.clone(), if i == answer { d.clone() } else { gauss(&mut r) });
            candidates.push(w);
        }
        questions.push(AnalogyQuestion {
            a: name("a"),
            b: name("b"),
            c: name("c"),
            candidates,
            answer_index: answer,
            category: if q % 2 == 0 { Category::CapitalWorld } else { Category::PositiveComparative },
            level: Level::Word,
        });
    }
    (table, questions)
}

pub fn table_provider(table: &HashMap<String, Vec<f64>>, scale: f64) -> impl Fn(&str) -> Result<Vec<f64>, ProviderError> + Sync + '_ {
    move |t: &str| {
        table
            .get(t)
            .map(|v| v.iter().map(|x| x * scale).collect())
            .ok_or_else(|| ProviderError::new(t, "unknown"))
    }
}

/// Deterministic pseudo-random vector per text.
pub fn random_provider(salt: u64, dim: usize) -> impl Fn(&str) -> Result<Vec<f64>, ProviderError> + Sync {
    move |t: &str| {
        let mut h = salt;
        for b in t.bytes() {
            h = unirep::seed::splitmix64(h ^ b as u64);
        }
        let mut r = rng(h);
        Ok((0..dim).map(|_| r.random_range(-1.0..1.0)).collect())
    }
}

// -------------------------------------------------------------- retrieval

/// Hand-written BM25 over raw token lists.
pub fn oracle_bm25(docs: &[Vec<String>], query: &[String], doc: usize) -> f64 {
    let n = docs.len() as f64;
    let avgdl = docs.iter().map(Vec::len).sum::<usize>() as f64 / n;
    let mut seen = Vec::new();
    let mut score = 0.0;
    for t in query {
        if seen.contains(t) {
            continue;
        }
        seen.push(t.clone());
        let df = docs.iter().filter(|d| d.contains(t)).count() as f64;
        let tf = docs[doc].iter().filter(|x| *x == t).count() as f64;
        if tf == 0.0 {
            continue;
        }
        let idf = (1.0 + (n - df + 0.5) / (df + 0.5)).ln();
        score += idf * tf * 2.2 / (tf + 1.2 * (0.25 + 0.75 * docs[doc].len() as f64 / avgdl));
    }
    score
}

/// Hand-written TF-IDF cosine with `(1 + ln tf)` and smoothed idf.
pub fn oracle_tfidf(docs: &[Vec<String>], query: &[String], doc: usize) -> f64 {
    let n = docs.len() as f64;
    let idf = |t: &String| {
        let df = docs.iter().filter(|d| d.contains(t)).count() as f64;
        ((1.0 + n) / (1.0 + df)).ln() + 1.0
    };
    let weights = |toks: &[String]| -> BTreeMap<String, f64> {
        let mut tf: BTreeMap<String, usize> = BTreeMap::new();
        for t in toks {
            *tf.entry(t.clone()).or_insert(0) += 1;
        }
        tf.into_iter().map(|(t, c)| {
            let w = (1.0 + (c as f64).ln()) * idf(&t);
            (t, w)
        }).collect()
    };
    let q = weights(query);
    let d = weights(&docs[doc]);
    let dot: f64 = q.iter().filter_map(|(t, w)| d.get(t).map(|x| w * x)).sum();
    let nq = q.values().map(|w| w * w).sum::<f64>().sqrt();
    let nd = d.values().map(|w| w * w).sum::<f64>().sqrt();
    if nq == 0.0 || nd == 0.0 {
        0.0
    } else {
        dot / (nq * nd)
    }
}

/// 1-based gold ranks to (acc, mrr) the long way.
pub fn oracle_acc_mrr(gold_ranks: &[Option<usize>]) -> (f64, f64) {
    let n = gold_ranks.len() as f64;
    let mut hits = 0usize;
    let mut rr = 0.0;
    for g in gold_ranks {
        if *g == Some(1) {
            hits += 1;
        }
        if let Some(r) = g {
            rr += 1.0 / *r as f64;
        }
    }
    (hits as f64 / n, rr / n)
}

/// Three documents with BM25 and TF-IDF scores worked out by hand for two
/// queries: `(query, bm25 per doc, tfidf per doc)`.
pub fn ranking_fixture() -> (Vec<Vec<String>>, Vec<(Vec<String>, [f64; 3], [f64; 3])>) {
    let docs = vec![words("the cat sat on the mat"), words("the dog chased the cat"), words("a bird sang")];
    let cases = vec![
        (
            words("the cat"),
            [1.0190036401511668, 1.090187545494109, 0.0],
            [0.6329034382882038, 0.7036459025393972, 0.0],
        ),
        (
            words("dog dog bird"),
            [0.0, 0.9529823657022451, 1.148651748774189],
            [0.0, 0.41832801237308787, 0.2936070455647439],
        ),
    ];
    (docs, cases)
}

// --------------------------------------------------------------- geometry

/// Pairs `(x, x + offset_c + noise)` per category: one Gaussian offset per
/// category, per-coordinate noise sd `sigma_ratio * |offset|`.
pub fn cohesion_fixture(
    seed: u64,
    categories: usize,
    pairs: usize,
    dim: usize,
    sigma_ratio: f64,
) -> BTreeMap<String, Vec<(Vec<f64>, Vec<f64>)>> {
    use rand_distr::{Distribution, Normal};
    let mut r = rng(seed);
    let unit = Normal::new(0.0, 1.0).unwrap();
    let mut out = BTreeMap::new();
    for c in 0..categories {
        let offset: Vec<f64> = (0..dim).map(|_| unit.sample(&mut r)).collect();
        let norm = offset.iter().map(|v| v * v).sum::<f64>().sqrt();
        let sigma = sigma_ratio * norm;
        let noise = Normal::new(0.0, sigma).unwrap();
        let list = (0..pairs)
            .map(|_| {
                let x: Vec<f64> = (0..dim).map(|_| unit.sample(&mut r)).collect();
                let y: Vec<f64> = x.iter().zip(&offset).map(|(a, o)| a + o + noise.sample(&mut r)).collect();
                (x, y)
            })
            .collect();
        out.insert(format!("cat{c}"), list);
    }
    out
}
