//! Command-line front end. Every subcommand prints a one-line JSON summary
//! on stdout and logs to stderr; pipeline failures exit with status 1,
//! usage errors with status 2.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::json;

use unirep::analogy::{self, load_word_vectors, EmbeddingStore, MeanOfWords, TemplateSet};
use unirep::corpus::{ingest_corpus, TokenMode};
use unirep::geometry;
use unirep::masking::{self, MaskingConfig, MaskingStrategy};
use unirep::mlm::{self, Checkpoint, Encoder, ModelConfig, TokenVocab, TrainConfig};
use unirep::ngram::{self, NgramVocab, VocabOptions};
use unirep::retrieval::{self, EmbeddingRanker, Index, LexicalMode, LexicalRanker, QaSet, Ranker};
use unirep::EmbeddingProvider;

#[derive(Parser)]
#[command(name = "unirep", version, about = "Universal-representation pipeline: n-gram extraction, masked LM instances, toy encoder training and evaluation")]
struct Cli {
    /// Cap on worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Score n-grams by length-normalized PMI and write the pruned vocabulary.
    ExtractNgrams(ExtractArgs),
    /// Generate masked LM instances for one epoch.
    MakeInstances(InstanceArgs),
    /// Train the toy encoder on masked LM instances.
    Train(TrainArgs),
    /// Build multiple-choice analogy questions from quadruples.
    BuildAnalogy(BuildAnalogyArgs),
    /// Evaluate an embedding provider on analogy questions.
    EvalAnalogy(EvalAnalogyArgs),
    /// Evaluate FAQ ranking (top-1 accuracy and MRR).
    FaqEval(FaqArgs),
    /// Two-stage retrieval (BM25 top-k, embedding re-rank) per template sentence.
    Generate(GenerateArgs),
    /// PCA projection and pair-difference cohesion as plot data.
    Project(ProjectArgs),
}

#[derive(Args)]
struct ExtractArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = ngram::DEFAULT_MAX_N)]
    max_n: usize,
    #[arg(long, default_value_t = ngram::DEFAULT_TOP_K)]
    top_k: usize,
    #[arg(long, default_value_t = ngram::DEFAULT_MIN_LEN)]
    min_len: usize,
    #[arg(long)]
    min_pmi: Option<f64>,
    #[arg(long, default_value = "word")]
    mode: TokenMode,
}

#[derive(Args)]
struct MaskArgs {
    #[arg(long, default_value_t = 0.15)]
    mask_ratio: f64,
    #[arg(long, default_value_t = 0.8)]
    p_mask: f64,
    #[arg(long, default_value_t = 0.1)]
    p_random: f64,
    #[arg(long, default_value_t = 0.1)]
    p_keep: f64,
    #[arg(long, default_value_t = 0.2)]
    geo_p: f64,
    #[arg(long, default_value_t = 10)]
    geo_lmax: usize,
    #[arg(long, default_value_t = 512)]
    max_seq_len: usize,
}

impl MaskArgs {
    fn config(&self, max_n: usize) -> MaskingConfig {
        MaskingConfig {
            mask_ratio: self.mask_ratio,
            p_mask: self.p_mask,
            p_random: self.p_random,
            p_keep: self.p_keep,
            max_n,
            geo_p: self.geo_p,
            geo_lmax: self.geo_lmax,
            max_seq_len: self.max_seq_len,
            ..MaskingConfig::default()
        }
    }
}

#[derive(Args)]
struct InstanceArgs {
    #[arg(long = "in")]
    input: PathBuf,
    /// N-gram vocabulary TSV (required for the ngram strategy).
    #[arg(long)]
    vocab: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value_t = 0)]
    epoch: u64,
    #[arg(long, default_value = "ngram")]
    strategy: MaskingStrategy,
    #[arg(long, default_value_t = ngram::DEFAULT_MAX_N)]
    max_n: usize,
    #[arg(long, default_value = "word")]
    mode: TokenMode,
    #[command(flatten)]
    mask: MaskArgs,
}

#[derive(Args)]
struct TrainArgs {
    /// Masked instances (JSON Lines).
    #[arg(long)]
    instances: PathBuf,
    /// Checkpoint output.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value_t = 500)]
    steps: usize,
    #[arg(long, default_value_t = 0.1)]
    lr: f64,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long, default_value_t = 2)]
    layers: usize,
    #[arg(long, default_value_t = 4)]
    heads: usize,
    #[arg(long, default_value_t = 64)]
    d_model: usize,
    #[arg(long, default_value_t = 128)]
    d_ff: usize,
    #[arg(long, default_value_t = 128)]
    max_len: usize,
    /// Optional per-step loss log (one value per line).
    #[arg(long)]
    losses: Option<PathBuf>,
}

#[derive(Args)]
struct BuildAnalogyArgs {
    /// Quadruples in `: section` / `a b c d` text format.
    #[arg(long)]
    quadruples: PathBuf,
    /// Reference word vectors used for negative sampling.
    #[arg(long)]
    reference: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Phrase/sentence template file (JSON).
    #[arg(long)]
    templates: Option<PathBuf>,
    #[arg(long, default_value_t = 5)]
    k: usize,
    /// Only use the first N reference words as candidates.
    #[arg(long)]
    max_vocab: Option<usize>,
    #[arg(long)]
    keep_case: bool,
}

#[derive(Args)]
struct ProviderArgs {
    /// Word vectors; sequences embed as the mean of their word vectors.
    #[arg(long, conflicts_with = "checkpoint")]
    vectors: Option<PathBuf>,
    /// Encoder checkpoint; sequences embed by mean pooling.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    #[arg(long, default_value = "word")]
    mode: TokenMode,
}

enum Provider {
    Store(EmbeddingStore, TokenMode),
    Encoder(Encoder),
}

impl Provider {
    fn load(args: &ProviderArgs) -> Result<Option<Self>> {
        Ok(match (&args.vectors, &args.checkpoint) {
            (Some(v), _) => Some(Provider::Store(load_word_vectors(v, false)?, args.mode)),
            (None, Some(c)) => Some(Provider::Encoder(Encoder::load(c, args.mode)?)),
            (None, None) => None,
        })
    }

    fn require(args: &ProviderArgs) -> Result<Self> {
        Self::load(args)?.ok_or_else(|| anyhow!("cli: one of --vectors or --checkpoint is required"))
    }
}

impl EmbeddingProvider for Provider {
    fn embed(&self, text: &str) -> Result<Vec<f64>, unirep::ProviderError> {
        match self {
            Provider::Store(store, mode) => MeanOfWords { store, mode: *mode }.embed(text),
            Provider::Encoder(e) => e.embed(text),
        }
    }
}

#[derive(Args)]
struct EvalAnalogyArgs {
    /// Questions (JSON Lines).
    #[arg(long)]
    questions: PathBuf,
    #[command(flatten)]
    provider: ProviderArgs,
    /// Report TSV (default: stderr only).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Per-category accuracy TSV.
    #[arg(long)]
    categories_out: Option<PathBuf>,
    #[arg(long, default_value = "model")]
    model: String,
}

#[derive(Args)]
struct FaqArgs {
    /// QA pairs and queries (JSON Lines).
    #[arg(long)]
    qa: PathBuf,
    /// bm25, tfidf or embedding.
    #[arg(long, default_value = "bm25")]
    method: String,
    #[command(flatten)]
    provider: ProviderArgs,
    /// Per-query results TSV.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct GenerateArgs {
    /// Document collection, one document per line.
    #[arg(long)]
    corpus: PathBuf,
    /// Templates (JSON Lines).
    #[arg(long)]
    templates: PathBuf,
    #[command(flatten)]
    provider: ProviderArgs,
    #[arg(long, default_value_t = retrieval::DEFAULT_RERANK_K)]
    rerank_k: usize,
    /// Per-template results (JSON Lines).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ProjectArgs {
    /// `label<TAB>category` lines to embed and project.
    #[arg(long)]
    items: PathBuf,
    #[command(flatten)]
    provider: ProviderArgs,
    /// Projection CSV (`label,category,x,y`).
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 2)]
    dim: usize,
    /// `category<TAB>first<TAB>second` lines for pair-difference cohesion.
    #[arg(long, requires = "cohesion_out")]
    pairs: Option<PathBuf>,
    /// Cohesion CSV (`category,intra_cosine,inter_cosine,n`).
    #[arg(long)]
    cohesion_out: Option<PathBuf>,
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("io: cannot read {}", path.display()))
}

fn write(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).with_context(|| format!("io: cannot write {}", path.display()))
}

fn extract_ngrams(a: ExtractArgs) -> Result<serde_json::Value> {
    let set = ingest_corpus(&a.input, a.mode)?;
    eprintln!("read {} documents, {} tokens", set.len(), set.total_tokens());
    let opts = VocabOptions {
        max_n: a.max_n,
        top_k: a.top_k,
        min_len: a.min_len,
        min_pmi: a.min_pmi,
    };
    let vocab = ngram::build_ngram_vocab(&set, &opts)?;
    vocab.write_tsv(&a.out)?;
    Ok(json!({
        "command": "extract-ngrams",
        "documents": set.len(),
        "tokens": set.total_tokens(),
        "entries": vocab.len(),
        "out": a.out,
    }))
}

fn make_instances(a: InstanceArgs) -> Result<serde_json::Value> {
    let set = ingest_corpus(&a.input, a.mode)?;
    let vocab = match (&a.vocab, a.strategy) {
        (Some(p), _) => NgramVocab::read_tsv(p, a.max_n)?,
        (None, MaskingStrategy::Span) => NgramVocab::new(a.max_n),
        (None, MaskingStrategy::Ngram) => bail!("cli: --vocab is required for the ngram strategy"),
    };
    let config = a.mask.config(a.max_n);
    let data = masking::generate_epoch_dataset_with(&set, &vocab, &config, a.seed, a.epoch, a.strategy)?;
    write(&a.out, &masking::to_jsonl(&data))?;
    let masked: usize = data.iter().map(|i| i.masked_count()).sum();
    let content: usize = data.iter().map(|i| i.content_len()).sum();
    eprintln!("{} instances, {masked} of {content} tokens selected", data.len());
    Ok(json!({
        "command": "make-instances",
        "instances": data.len(),
        "masked_tokens": masked,
        "content_tokens": content,
        "seed": a.seed,
        "epoch": a.epoch,
        "out": a.out,
    }))
}

fn train(a: TrainArgs) -> Result<serde_json::Value> {
    let data = masking::parse_jsonl(&read(&a.instances)?)?;
    if data.is_empty() {
        bail!("mlm: no training instances in {}", a.instances.display());
    }
    let vocab = TokenVocab::from_instances(&data);
    let config = ModelConfig {
        layers: a.layers,
        heads: a.heads,
        d_model: a.d_model,
        d_ff: a.d_ff,
        vocab_size: vocab.len(),
        max_len: a.max_len,
    };
    let params = mlm::init_model(config, a.seed)?;
    eprintln!("training {} parameters on {} instances", params.len(), data.len());
    let mut tc = TrainConfig::new(a.steps, a.lr, a.seed);
    tc.batch_size = a.batch_size;
    let report = mlm::train(params, &vocab, &data, &tc)?;
    Checkpoint::new(&report.params, &vocab).save(&a.out)?;
    if let Some(p) = &a.losses {
        let text: String = report.losses.iter().map(|l| format!("{l}\n")).collect();
        write(p, &text)?;
    }
    Ok(json!({
        "command": "train",
        "parameters": report.params.len(),
        "vocab_size": vocab.len(),
        "steps": a.steps,
        "initial_loss": report.losses[0],
        "final_loss": report.losses[report.losses.len() - 1],
        "out": a.out,
    }))
}

fn build_analogy(a: BuildAnalogyArgs) -> Result<serde_json::Value> {
    let quads = analogy::parse_quadruples(&read(&a.quadruples)?, !a.keep_case)?;
    let mut reference = load_word_vectors(&a.reference, false)?;
    if let Some(n) = a.max_vocab {
        reference.truncate(n);
    }
    let templates = a.templates.as_deref().map(|p| TemplateSet::parse(&read(p)?).map_err(anyhow::Error::from)).transpose()?;
    let data = analogy::build_analogy_dataset(&quads, templates.as_ref(), &reference, a.k)?;
    write(&a.out, &analogy::questions_to_jsonl(&data.questions))?;
    eprintln!("{} questions, {} quadruples skipped", data.questions.len(), data.skipped);
    Ok(json!({
        "command": "build-analogy",
        "questions": data.questions.len(),
        "skipped": data.skipped,
        "out": a.out,
    }))
}

fn eval_analogy(a: EvalAnalogyArgs) -> Result<serde_json::Value> {
    let questions = analogy::parse_questions_jsonl(&read(&a.questions)?)?;
    let provider = Provider::require(&a.provider)?;
    let report = analogy::evaluate_analogy(&provider, &questions)?;
    let tsv = report.to_tsv(&a.model);
    eprint!("{tsv}");
    if let Some(p) = &a.out {
        write(p, &tsv)?;
    }
    if let Some(p) = &a.categories_out {
        write(p, &report.categories_tsv())?;
    }
    Ok(json!({
        "command": "eval-analogy",
        "questions": report.questions,
        "correct": report.correct,
        "micro_accuracy": report.micro_accuracy(),
        "overall": report.overall(),
    }))
}

fn faq_eval(a: FaqArgs) -> Result<serde_json::Value> {
    let qa = QaSet::parse_jsonl(&read(&a.qa)?)?;
    let provider = Provider::load(&a.provider)?;
    let ranker: Box<dyn Ranker + '_> = match a.method.as_str() {
        "embedding" => {
            let p = provider.as_ref().ok_or_else(|| anyhow!("cli: embedding method needs --vectors or --checkpoint"))?;
            Box::new(EmbeddingRanker::new(p, &qa)?)
        }
        m => {
            let mode: LexicalMode = m.parse().map_err(|e: String| anyhow!("cli: {e}"))?;
            Box::new(LexicalRanker::new(&qa, mode, a.provider.mode)?)
        }
    };
    let report = retrieval::evaluate_faq(ranker.as_ref(), &qa)?;
    eprintln!("{}\n{}", retrieval::FaqReport::TABLE_HEADER, report.table_row(&a.method));
    if let Some(p) = &a.out {
        write(p, &report.results_tsv())?;
    }
    Ok(json!({
        "command": "faq-eval",
        "method": a.method,
        "queries": report.rows.len(),
        "acc": report.acc,
        "mrr": report.mrr,
    }))
}

fn generate(a: GenerateArgs) -> Result<serde_json::Value> {
    let texts: Vec<String> = read(&a.corpus)?.lines().filter(|l| !l.trim().is_empty()).map(String::from).collect();
    let index = Index::from_texts(texts, a.provider.mode)?;
    let templates = retrieval::parse_templates_jsonl(&read(&a.templates)?)?;
    let provider = Provider::require(&a.provider)?;
    let p: &dyn EmbeddingProvider = &provider;
    let vectors = retrieval::embed_all(p, index.texts())?;
    let mut out = String::new();
    let mut clamped = false;
    for t in &templates {
        let r = retrieval::two_stage_retrieve_cached(&index, p, &vectors, t, a.rerank_k)?;
        clamped |= r.clamped;
        out.push_str(&serde_json::to_string(&r)?);
        out.push('\n');
    }
    if clamped {
        eprintln!("rerank k {} clamped to collection size {}", a.rerank_k, index.len());
    }
    write(&a.out, &out)?;
    Ok(json!({
        "command": "generate",
        "documents": index.len(),
        "templates": templates.len(),
        "k": a.rerank_k.min(index.len()),
        "clamped": clamped,
        "out": a.out,
    }))
}

fn tab_fields(text: &str, n: usize, what: &str) -> Result<Vec<Vec<String>>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            let f: Vec<String> = l.split('\t').map(|s| s.trim().to_string()).collect();
            if f.len() != n {
                bail!("geometry: {what} line {}: expected {n} tab-separated fields", i + 1);
            }
            Ok(f)
        })
        .collect()
}

fn project(a: ProjectArgs) -> Result<serde_json::Value> {
    let items = tab_fields(&read(&a.items)?, 2, "items")?;
    let provider = Provider::require(&a.provider)?;
    let p = &provider;
    let vectors = items.iter().map(|f| p.embed(&f[0])).collect::<Result<Vec<_>, _>>()?;
    let projection = geometry::pca_project(&vectors, a.dim)?;
    let labels: Vec<String> = items.iter().map(|f| f[0].clone()).collect();
    let categories: Vec<String> = items.iter().map(|f| f[1].clone()).collect();
    write(&a.out, &geometry::projection_csv(&labels, &categories, &projection)?)?;
    let mut summary = json!({
        "command": "project",
        "points": vectors.len(),
        "explained_variance": projection.explained_variance,
        "out": a.out,
    });
    if let (Some(pairs_path), Some(cohesion_out)) = (&a.pairs, &a.cohesion_out) {
        let mut pairs: BTreeMap<String, Vec<(Vec<f64>, Vec<f64>)>> = BTreeMap::new();
        for f in tab_fields(&read(pairs_path)?, 3, "pairs")? {
            pairs.entry(f[0].clone()).or_default().push((p.embed(&f[1])?, p.embed(&f[2])?));
        }
        let report = geometry::pair_difference_analysis(&pairs)?;
        write(cohesion_out, &report.to_csv()?)?;
        eprintln!("cohesion: {} of {} categories separated", report.categories.iter().filter(|c| c.separated).count(), report.categories.len());
        summary["separated"] = json!(report.separated());
        summary["excluded_pairs"] = json!(report.excluded);
        summary["cohesion_out"] = json!(cohesion_out);
    }
    Ok(summary)
}

fn run(cli: Cli) -> Result<serde_json::Value> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("cli: cannot configure thread pool")?;
    }
    match cli.command {
        Command::ExtractNgrams(a) => extract_ngrams(a),
        Command::MakeInstances(a) => make_instances(a),
        Command::Train(a) => train(a),
        Command::BuildAnalogy(a) => build_analogy(a),
        Command::EvalAnalogy(a) => eval_analogy(a),
        Command::FaqEval(a) => faq_eval(a),
        Command::Generate(a) => generate(a),
        Command::Project(a) => project(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
