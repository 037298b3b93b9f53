use std::collections::HashSet;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use sentanalog::annotation::load_annotated;
use sentanalog::assets;
use sentanalog::datagen::{
    self, category, expand_questions, gen_comparative, gen_nationality, gen_opposite, gen_plural, gen_semantic,
    gen_verb_conjugation, load_templates, load_word_map, load_word_pairs, relation_pairs, Lexicon, WordClasses,
};
use sentanalog::distractors::{annotations_from_rows, build_relation_questions, write_span_review};
use sentanalog::encoders::{encode_all, tokenize_sentence, EncoderMethod, TokenizerConfig};
use sentanalog::evaluator::build_report;
use sentanalog::jsonl::{read_jsonl_file, write_jsonl};
use sentanalog::store::{load_sentence_embeddings, load_word_vectors_with, write_sentence_embeddings, WordVectorOptions};
use sentanalog::{
    AnalogyQuestion, CandidateScope, DistractorConfig, Metric, OovMode, OovPolicy, Prediction, ReportFormat,
    SentencePair, Solver, SolverConfig,
};

#[derive(Parser)]
#[command(name = "sentanalog", version, about = "Sentence analogy datasets and 3CosAdd/3CosMul evaluation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fill templates with word pairs (capitals, currency, family, nationality).
    GenSemantic(GenSemantic),
    /// Derive comparative/opposite/plural/verb pairs from an annotated corpus.
    GenSyntactic(GenSyntactic),
    /// Convert entailment/negation rows into sentence pairs.
    IngestRelations(IngestRelations),
    /// Expand sentence pairs into analogy questions.
    Expand(Expand),
    /// Relation questions whose candidates are the target and its distractors.
    GenDistractors(GenDistractors),
    /// Sentence embeddings from word vectors.
    Encode(Encode),
    /// Answer questions with 3CosAdd / 3CosMul.
    Solve(Solve),
    /// Accuracy tables from predictions.
    Report(Report),
}

#[derive(Args)]
struct Output {
    /// Output file; stdout when absent.
    #[arg(short, long)]
    output: Option<PathBuf>,
}

impl Output {
    fn open(&self) -> Result<Box<dyn Write>> {
        open_output(self.output.as_deref())
    }
}

fn open_output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("cannot create {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

#[derive(Args)]
struct GenSemantic {
    /// Template JSON; the bundled templates when absent.
    #[arg(long)]
    templates: Option<PathBuf>,
    /// Directory of `<category>.tsv` word-pair files; bundled lists when absent.
    #[arg(long)]
    pairs_dir: Option<PathBuf>,
    /// `word TAB class` file for slot adaptation; bundled classes when absent.
    #[arg(long)]
    word_classes: Option<PathBuf>,
    /// Categories to generate; all six when absent.
    #[arg(long, value_delimiter = ',')]
    categories: Vec<String>,
    #[command(flatten)]
    out: Output,
}

#[derive(Clone, Copy, ValueEnum)]
enum SyntacticKind {
    Comparative,
    Opposite,
    Plural,
    VerbConjugation,
}

#[derive(Args)]
struct GenSyntactic {
    /// Annotated sentences, one JSON object per line.
    #[arg(long)]
    corpus: PathBuf,
    /// Directory with base_forms.tsv, antonyms.tsv, singular_forms.tsv and
    /// inflections.tsv; bundled lexicon when absent.
    #[arg(long)]
    lexicon_dir: Option<PathBuf>,
    #[arg(long, value_enum, value_delimiter = ',')]
    categories: Vec<SyntacticKind>,
    #[command(flatten)]
    out: Output,
}

#[derive(Args)]
struct IngestRelations {
    /// Rows with premise, hypothesis, relation and optional annotations.
    #[arg(long)]
    rows: PathBuf,
    #[command(flatten)]
    out: Output,
}

#[derive(Args)]
struct Expand {
    /// Sentence-pair files, concatenated in order.
    #[arg(long, required = true)]
    pairs: Vec<PathBuf>,
    #[command(flatten)]
    out: Output,
}

#[derive(Args)]
struct GenDistractors {
    #[arg(long)]
    rows: PathBuf,
    /// JSON distractor settings; flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    deletion_prob: Option<f64>,
    #[arg(long)]
    mask_prob: Option<f64>,
    #[arg(long)]
    span_lambda: Option<f64>,
    #[arg(long)]
    span_count: Option<usize>,
    #[arg(long)]
    mask_token: Option<String>,
    #[arg(long)]
    propagate_conjuncts: bool,
    /// Candidate sets as JSONL.
    #[arg(long)]
    candidates: Option<PathBuf>,
    /// TSV of span deletions for manual review.
    #[arg(long)]
    span_review: Option<PathBuf>,
    #[command(flatten)]
    out: Output,
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    Avg,
    SqrtSum,
    Dct,
}

#[derive(Clone, Copy, ValueEnum)]
enum Oov {
    Error,
    Skip,
    Zero,
}

#[derive(Args)]
struct Encode {
    /// Word vectors: `word v1 ... vd` lines, optional `count dim` header.
    #[arg(long)]
    vectors: PathBuf,
    /// Question files; every sentence they mention is encoded.
    #[arg(long)]
    questions: Vec<PathBuf>,
    /// Sentence-pair files; both sides are encoded.
    #[arg(long)]
    pairs: Vec<PathBuf>,
    #[arg(long, value_enum, default_value = "avg")]
    method: Method,
    /// Highest DCT coefficient kept.
    #[arg(long, default_value_t = 0)]
    k: usize,
    #[arg(long, value_enum, default_value = "error")]
    oov: Oov,
    /// Log each out-of-vocabulary token.
    #[arg(long)]
    report_oov: bool,
    /// Keep the original case of tokens.
    #[arg(long)]
    cased: bool,
    #[command(flatten)]
    out: Output,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum MetricArg {
    CosAdd,
    CosMul,
    All,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ProtocolArg {
    Constrained,
    Unconstrained,
    Both,
}

#[derive(Args)]
struct Solve {
    #[arg(long)]
    embeddings: PathBuf,
    #[arg(long)]
    questions: PathBuf,
    #[arg(long, value_enum, default_value = "all")]
    metric: MetricArg,
    #[arg(long, value_enum, default_value = "both")]
    protocol: ProtocolArg,
    #[arg(long, default_value_t = sentanalog::solver::DEFAULT_EPSILON)]
    epsilon: f64,
    /// Keep the best `k` candidates per question.
    #[arg(long, default_value_t = 1)]
    top_k: usize,
    /// Worker threads; rayon's default when absent.
    #[arg(long)]
    threads: Option<usize>,
    #[command(flatten)]
    out: Output,
}

#[derive(Args)]
struct Report {
    #[arg(long)]
    predictions: PathBuf,
    #[arg(long)]
    questions: PathBuf,
    /// Sentence pairs, for the distribution of predicted slot labels.
    #[arg(long)]
    pairs: Vec<PathBuf>,
    /// csv, json or markdown.
    #[arg(long, default_value = "markdown")]
    format: ReportFormat,
    /// Label distribution CSV; needs --pairs.
    #[arg(long)]
    labels: Option<PathBuf>,
    #[command(flatten)]
    out: Output,
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    if let Err(e) = run(Cli::parse()) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::GenSemantic(a) => gen_semantic_cmd(a),
        Command::GenSyntactic(a) => gen_syntactic_cmd(a),
        Command::IngestRelations(a) => {
            let pairs = datagen::ingest_relation_pairs(&a.rows)?;
            write_jsonl(a.out.open()?, &pairs)?;
            Ok(())
        }
        Command::Expand(a) => {
            let pairs = read_pairs(&a.pairs)?;
            write_jsonl(a.out.open()?, &expand_questions(&pairs))?;
            Ok(())
        }
        Command::GenDistractors(a) => gen_distractors_cmd(a),
        Command::Encode(a) => encode_cmd(a),
        Command::Solve(a) => solve_cmd(a),
        Command::Report(a) => report_cmd(a),
    }
}

fn read_pairs(paths: &[PathBuf]) -> Result<Vec<SentencePair>> {
    let mut out = Vec::new();
    for p in paths {
        out.extend(read_jsonl_file::<SentencePair>(p)?);
    }
    Ok(out)
}

const ALL_SEMANTIC: [&str; 6] = [
    category::COMMON_CAPITAL,
    category::ALL_CAPITAL,
    category::CITY_IN_STATE,
    category::CURRENCY,
    category::FAMILY,
    category::NATIONALITY_ADJECTIVE,
];

fn gen_semantic_cmd(a: GenSemantic) -> Result<()> {
    let templates = match &a.templates {
        Some(p) => load_templates(p)?,
        None => assets::templates(),
    };
    let classes = match &a.word_classes {
        Some(p) => WordClasses::load(p)?,
        None => assets::word_classes(),
    };
    let categories: Vec<&str> = if a.categories.is_empty() {
        ALL_SEMANTIC.to_vec()
    } else {
        a.categories.iter().map(String::as_str).collect()
    };
    let load = |cat: &str| -> Result<Vec<datagen::WordPair>> {
        match &a.pairs_dir {
            Some(dir) => Ok(load_word_pairs(dir.join(format!("{cat}.tsv")), cat)?),
            None => assets::word_pairs(cat).with_context(|| format!("no bundled word pairs for `{cat}`")),
        }
    };

    let mut word_pairs = Vec::new();
    let mut nationality = None;
    for &cat in &categories {
        if !ALL_SEMANTIC.contains(&cat) {
            bail!("unknown semantic category `{cat}`");
        }
        if cat == category::NATIONALITY_ADJECTIVE {
            nationality = Some(load(cat)?);
        } else {
            word_pairs.extend(load(cat)?);
        }
    }
    let mut pairs = if word_pairs.is_empty() {
        Vec::new()
    } else {
        gen_semantic(&templates, &word_pairs, &classes)?
    };
    if let Some(np) = nationality {
        pairs.extend(gen_nationality(&templates, &np)?);
    }
    write_jsonl(a.out.open()?, &pairs)?;
    Ok(())
}

fn gen_syntactic_cmd(a: GenSyntactic) -> Result<()> {
    let corpus = load_annotated(&a.corpus)?;
    let lex = match &a.lexicon_dir {
        Some(dir) => Lexicon {
            base_forms: load_word_map(dir.join("base_forms.tsv"))?,
            antonyms: load_word_map(dir.join("antonyms.tsv"))?,
            singular_forms: load_word_map(dir.join("singular_forms.tsv"))?,
            inflections: load_word_map(dir.join("inflections.tsv"))?,
        },
        None => assets::lexicon(),
    };
    let kinds = if a.categories.is_empty() {
        vec![
            SyntacticKind::Comparative,
            SyntacticKind::Opposite,
            SyntacticKind::Plural,
            SyntacticKind::VerbConjugation,
        ]
    } else {
        a.categories
    };
    let mut pairs = Vec::new();
    for kind in kinds {
        pairs.extend(match kind {
            SyntacticKind::Comparative => gen_comparative(&corpus, &lex.base_forms),
            SyntacticKind::Opposite => gen_opposite(&corpus, &lex.antonyms),
            SyntacticKind::Plural => gen_plural(&corpus, &lex.singular_forms),
            SyntacticKind::VerbConjugation => gen_verb_conjugation(&corpus, &lex.inflections),
        });
    }
    write_jsonl(a.out.open()?, &pairs)?;
    Ok(())
}

fn gen_distractors_cmd(a: GenDistractors) -> Result<()> {
    let mut cfg: DistractorConfig = match &a.config {
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("cannot read {}", p.display()))?;
            serde_json::from_str(&text).with_context(|| format!("invalid distractor config {}", p.display()))?
        }
        None => DistractorConfig::default(),
    };
    if let Some(v) = a.seed {
        cfg.seed = v;
    }
    if let Some(v) = a.deletion_prob {
        cfg.deletion_prob = v;
    }
    if let Some(v) = a.mask_prob {
        cfg.mask_prob = v;
    }
    if let Some(v) = a.span_lambda {
        cfg.span_lambda = v;
    }
    if let Some(v) = a.span_count {
        cfg.span_count = v;
    }
    if let Some(v) = a.mask_token {
        cfg.mask_token = v;
    }
    cfg.propagate_conjuncts |= a.propagate_conjuncts;

    let name = a.rows.display().to_string();
    let rows = read_jsonl_file(&a.rows)?;
    let pairs = relation_pairs(&rows, &name)?;
    let ds = build_relation_questions(&pairs, &annotations_from_rows(&rows), &cfg)?;
    write_jsonl(a.out.open()?, &ds.questions)?;
    if let Some(p) = &a.candidates {
        write_jsonl(open_output(Some(p))?, &ds.candidate_sets)?;
    }
    if let Some(p) = &a.span_review {
        write_span_review(&ds.candidate_sets, open_output(Some(p))?)?;
    }
    Ok(())
}

/// Distinct sentences in order of first mention.
fn collect_sentences(questions: &[PathBuf], pairs: &[PathBuf]) -> Result<Vec<String>> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    let mut add = |s: &str| {
        if seen.insert(s.to_owned()) {
            out.push(s.to_owned());
        }
    };
    for p in questions {
        for q in read_jsonl_file::<AnalogyQuestion>(p)? {
            for s in [&q.a, &q.b, &q.c, &q.gold_d] {
                add(s);
            }
            if let CandidateScope::Explicit { items } = &q.candidate_scope {
                items.iter().for_each(|s| add(s));
            }
        }
    }
    for p in read_pairs(pairs)? {
        add(&p.s_a);
        add(&p.s_b);
    }
    Ok(out)
}

fn encode_cmd(a: Encode) -> Result<()> {
    if a.questions.is_empty() && a.pairs.is_empty() {
        bail!("nothing to encode: pass --questions or --pairs");
    }
    let tok = TokenizerConfig {
        lowercase: !a.cased,
        ..TokenizerConfig::default()
    };
    let sentences: Vec<_> = collect_sentences(&a.questions, &a.pairs)?
        .iter()
        .map(|s| tokenize_sentence(s.as_str(), s, &tok))
        .collect();
    let vocab: HashSet<String> = sentences.iter().flat_map(|s| s.tokens.iter().cloned()).collect();
    let words = load_word_vectors_with(
        &a.vectors,
        &WordVectorOptions {
            expected_dim: None,
            vocabulary: Some(&vocab),
        },
    )?;
    log::info!("{} of {} vocabulary tokens have vectors", words.len(), vocab.len());
    let method = match a.method {
        Method::Avg => EncoderMethod::Avg,
        Method::SqrtSum => EncoderMethod::SqrtSum,
        Method::Dct => EncoderMethod::Dct { k: a.k },
    };
    let policy = OovPolicy {
        mode: match a.oov {
            Oov::Error => OovMode::Error,
            Oov::Skip => OovMode::SkipToken,
            Oov::Zero => OovMode::ZeroVector,
        },
        report: a.report_oov,
    };
    let table = encode_all(&sentences, &words, policy, method)?;
    write_sentence_embeddings(&table, a.out.open()?)?;
    Ok(())
}

fn solve_cmd(a: Solve) -> Result<()> {
    let table = load_sentence_embeddings(&a.embeddings)?;
    let questions: Vec<AnalogyQuestion> = read_jsonl_file(&a.questions)?;
    let metrics: &[Metric] = match a.metric {
        MetricArg::CosAdd => &[Metric::CosAdd],
        MetricArg::CosMul => &[Metric::CosMul],
        MetricArg::All => &[Metric::CosAdd, Metric::CosMul],
    };
    let protocols: &[bool] = match a.protocol {
        ProtocolArg::Constrained => &[true],
        ProtocolArg::Unconstrained => &[false],
        ProtocolArg::Both => &[false, true],
    };
    let mut out = a.out.open()?;
    for &metric in metrics {
        for &constrained in protocols {
            let cfg = SolverConfig {
                epsilon: a.epsilon,
                top_k: a.top_k,
                ..SolverConfig::new(metric, constrained)
            };
            let mut solver = Solver::new(&table, cfg)?;
            if let Some(t) = a.threads {
                solver = solver.with_threads(t)?;
            }
            let preds = solver.solve_batch(&questions)?;
            if solver.zero_norm_count() > 0 {
                log::warn!("{} zero-norm similarities scored as 0", solver.zero_norm_count());
            }
            write_jsonl(&mut out, &preds)?;
        }
    }
    out.flush()?;
    Ok(())
}

fn report_cmd(a: Report) -> Result<()> {
    let predictions: Vec<Prediction> = read_jsonl_file(&a.predictions)?;
    let questions: Vec<AnalogyQuestion> = read_jsonl_file(&a.questions)?;
    let pairs = if a.pairs.is_empty() { None } else { Some(read_pairs(&a.pairs)?) };
    if a.labels.is_some() && pairs.is_none() {
        bail!("--labels needs --pairs");
    }
    let report = build_report(&predictions, &questions, pairs.as_deref())?;
    report.emit(a.format, a.out.open()?)?;
    if let Some(p) = &a.labels {
        report.emit_labels(open_output(Some(p))?)?;
    }
    Ok(())
}
