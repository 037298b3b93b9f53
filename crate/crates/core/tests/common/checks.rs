//! Criterion checks shared by the integration tests and the acceptance
//! runner. Each returns a one-line summary, or the first violation found.

use std::collections::HashSet;

use rand::Rng;
use sentanalog::annotation::{AnnotatedSentence, Token};
use sentanalog::assets;
use sentanalog::datagen::{
    category, expand_questions, gen_comparative, gen_nationality, gen_opposite,
    gen_plural, gen_semantic, gen_verb_conjugation, question_count, read_relation_rows, relation_pairs,
    SentencePair,
};
use sentanalog::distractors::{
    annotations_from_rows, apply as apply_kind, body_len, build_candidate_set, build_relation_questions, keyed_rng, not_negation,
    random_deletion, random_masking, span_deletion, DistractorConfig, DistractorKind, PROTECTED_POS,
};
use sentanalog::encoders::{encode, encode_all, tokenize, tokenize_sentence, EncoderMethod, TokenizedSentence, TokenizerConfig};
use sentanalog::evaluator::{build_report, ReportFormat, COLUMNS};
use sentanalog::jsonl::write_jsonl;
use sentanalog::solver::{Metric, Solver, SolverConfig};
use sentanalog::store::{write_sentence_embeddings, EmbeddingTable, OovMode, OovPolicy};
use sha2::{Digest, Sha256};
use statrs::distribution::{ChiSquared, ContinuousCDF, Discrete, DiscreteCDF, Poisson};

use super::*;

pub type Check = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)*) => {
        if !$cond {
            return Err(format!($($fmt)*));
        }
    };
}

/// Sentence-pair and question counts per category of the reference dataset.
pub const REFERENCE_COUNTS: [(&str, u64, u64); 12] = [
    ("common_capital", 138, 9_453),
    ("all_capital", 928, 430_128),
    ("city_in_state", 402, 80_601),
    ("currency", 150, 11_175),
    ("family", 126, 7_875),
    ("comparative", 466, 108_345),
    ("opposite", 513, 131_328),
    ("nationality_adjective", 205, 20_910),
    ("plural", 512, 130_816),
    ("verb_conjugation", 451, 101_475),
    ("entailment", 673, 226_128),
    ("negation", 511, 130_305),
];

pub fn question_counts() -> Check {
    let mut total = 0;
    for (cat, n, want) in REFERENCE_COUNTS {
        let pairs: Vec<SentencePair> = (0..n as usize).map(|i| pair(cat, i)).collect();
        let questions = expand_questions(&pairs);
        let got = questions.iter().filter(|q| &*q.category == cat).count() as u64;
        ensure!(got == questions.len() as u64, "{cat}: questions leaked into another category");
        ensure!(got == want, "{cat}: {n} pairs expanded to {got} questions, want {want}");
        ensure!(question_count(n) == want, "{cat}: question_count({n}) = {}", question_count(n));
        total += got;
    }
    Ok(format!("12/12 categories, {total} questions"))
}

const CONFIGS: [(Metric, bool); 4] = COLUMNS;

pub fn solver_oracle(instances: usize) -> Check {
    let mut rng = rng(2024);
    for case in 0..instances {
        let inst = instance(&mut rng);
        let q = instance_question(&inst, &format!("q{case}"));
        let cands: Vec<usize> = (0..inst.table.len()).collect();
        for (metric, constrained) in CONFIGS {
            let cfg = SolverConfig::new(metric, constrained);
            let (best, rank) = naive_solve(&inst.table, &cfg, inst.abc, inst.gold, &cands);
            let p = Solver::new(&inst.table, cfg.clone())
                .and_then(|s| s.solve(&q, &cands))
                .map_err(|e| e.to_string())?;
            let label = cfg.column();
            ensure!(
                p.predicted == inst.table.id(best),
                "instance {case} {label}: predicted {} but the naive loop picks {}",
                p.predicted,
                inst.table.id(best)
            );
            ensure!(p.rank_of_gold == rank, "instance {case} {label}: gold rank {:?} vs {rank:?}", p.rank_of_gold);
        }
    }

    let mut rng = super::rng(2025);
    let table = random_table(&mut rng, 400, 16);
    let qs = random_questions(&mut rng, &table, 10_000, 5);
    let pools = sentanalog::datagen::category_pools(&qs);
    for (metric, constrained) in CONFIGS {
        let cfg = SolverConfig::new(metric, constrained);
        let solver = Solver::new(&table, cfg.clone()).map_err(|e| e.to_string())?;
        let batch = solver.solve_batch(&qs).map_err(|e| e.to_string())?;
        let mut seq = Vec::with_capacity(qs.len());
        for q in &qs {
            let cands: Vec<usize> = pools[&q.category].iter().map(|id| table.index_of(id).unwrap()).collect();
            seq.push(solver.solve(q, &cands).map_err(|e| e.to_string())?);
        }
        let par = Solver::new(&table, cfg.clone())
            .and_then(|s| s.with_threads(4))
            .and_then(|s| s.solve_batch(&qs))
            .map_err(|e| e.to_string())?;
        let batch = serde_json::to_vec(&batch).unwrap();
        ensure!(batch == serde_json::to_vec(&seq).unwrap(), "{}: batch differs from sequential", cfg.column());
        ensure!(batch == serde_json::to_vec(&par).unwrap(), "{}: batch differs from 4-thread run", cfg.column());
    }
    Ok(format!("{instances} instances x 4 columns agree; batch = sequential = parallel on {} questions", qs.len()))
}

const STRICT: OovPolicy = OovPolicy {
    mode: OovMode::Error,
    report: false,
};

fn word_table(rng: &mut ChaCha8Rng, n: usize, dim: usize) -> EmbeddingTable {
    table_from((0..n).map(|i| (format!("w{i}"), gaussian(rng, dim))).collect())
}

fn random_sentences(rng: &mut ChaCha8Rng, count: usize, vocab: usize, max_len: usize) -> Vec<TokenizedSentence> {
    (0..count)
        .map(|i| {
            let len = rng.random_range(1..=max_len);
            TokenizedSentence::new(format!("t{i}"), (0..len).map(|_| format!("w{}", rng.random_range(0..vocab))).collect())
        })
        .collect()
}

fn predictions(table: &EmbeddingTable, qs: &[AnalogyQuestion], metric: Metric, constrained: bool) -> Result<Vec<String>, String> {
    Ok(Solver::new(table, SolverConfig::new(metric, constrained))
        .and_then(|s| s.solve_batch(qs))
        .map_err(|e| e.to_string())?
        .into_iter()
        .map(|p| p.predicted)
        .collect())
}

/// Random category-pool questions over ids `t0..tn`.
fn sentence_questions(rng: &mut ChaCha8Rng, n_items: usize, count: usize) -> Vec<AnalogyQuestion> {
    let ids = table_from((0..n_items).map(|i| (format!("t{i}"), vec![1.0])).collect());
    random_questions(rng, &ids, count, 4)
}

pub fn dct_properties() -> Check {
    let mut rng = rng(77);
    let words = word_table(&mut rng, 300, 12);

    let mut worst_ac: f64 = 0.0;
    for w in 0..50 {
        for len in 1..=20 {
            let s = TokenizedSentence::new("c", vec![format!("w{w}"); len]);
            let c = encode(&s, &words, STRICT, EncoderMethod::Dct { k: len - 1 }).map_err(|e| e.to_string())?;
            for x in &c[12..] {
                worst_ac = worst_ac.max(x.abs());
            }
        }
    }
    ensure!(worst_ac <= 1e-9, "constant sentence has |c_k| = {worst_ac:e} for some k >= 1");

    let mut worst_rel: f64 = 0.0;
    for s in random_sentences(&mut rng, 1_000, 300, 30) {
        let n = s.tokens.len();
        let c = encode(&s, &words, STRICT, EncoderMethod::Dct { k: n - 1 }).map_err(|e| e.to_string())?;
        let energy: f64 = s.tokens.iter().flat_map(|t| words.get(t).unwrap()).map(|x| x * x).sum();
        let coef: f64 = c.iter().map(|x| x * x).sum();
        worst_rel = worst_rel.max((energy - coef).abs() / energy);
    }
    ensure!(worst_rel <= 1e-6, "Parseval relative error {worst_rel:e}");

    let sentences = random_sentences(&mut rng, 200, 300, 20);
    let avg = encode_all(&sentences, &words, STRICT, EncoderMethod::Avg).map_err(|e| e.to_string())?;
    let dc = encode_all(&sentences, &words, STRICT, EncoderMethod::Dct { k: 0 }).map_err(|e| e.to_string())?;
    let qs = sentence_questions(&mut rng, 200, 1_000);
    for (metric, constrained) in CONFIGS {
        ensure!(
            predictions(&avg, &qs, metric, constrained)? == predictions(&dc, &qs, metric, constrained)?,
            "c0 and mean encoders disagree under {}",
            SolverConfig::new(metric, constrained).column()
        );
    }
    Ok(format!(
        "max |c_k| {worst_ac:.1e}; max Parseval error {worst_rel:.1e}; c0 = mean on {} questions x 4 columns",
        qs.len()
    ))
}

pub fn invariance() -> Check {
    let mut rng = rng(78);
    let dim = 32;
    let table = table_from((0..250).map(|i| (format!("t{i}"), gaussian(&mut rng, dim))).collect());
    let q = random_orthogonal(&mut rng, dim);
    let scales: Vec<f64> = (0..250).map(|_| 10f64.powf(rng.random_range(-2.0..2.0))).collect();
    let moved = table
        .map_vectors(|id, v| {
            let s = scales[id[1..].parse::<usize>().unwrap()];
            apply(&q, v).into_iter().map(|x| x * s).collect()
        })
        .map_err(|e| e.to_string())?;
    let qs = sentence_questions(&mut rng, 250, 1_000);
    for (metric, constrained) in CONFIGS {
        let before = predictions(&table, &qs, metric, constrained)?;
        let after = predictions(&moved, &qs, metric, constrained)?;
        let changed = before.iter().zip(&after).filter(|(a, b)| a != b).count();
        ensure!(changed == 0, "{changed} of {} predictions changed under {}", qs.len(), SolverConfig::new(metric, constrained).column());
    }
    Ok(format!("{} predictions x 4 columns unchanged", qs.len()))
}

fn raw_tokens(text: &str) -> Vec<String> {
    tokenize(
        text,
        &TokenizerConfig {
            lowercase: false,
            split_punctuation: true,
        },
    )
}

fn sorted(mut v: Vec<String>) -> Vec<String> {
    v.sort();
    v
}

fn is_not(t: &Token) -> bool {
    t.text.eq_ignore_ascii_case("not")
}

/// Annotation for the token sequence produced by `not_negation`: original
/// tokens keep their annotation, inserted `not`s attach to the next token.
pub fn reannotate(s: &AnnotatedSentence, body: &[String]) -> AnnotatedSentence {
    let n = body_len(s);
    let mut map = vec![0; s.tokens.len()];
    let mut tokens: Vec<(Token, bool)> = Vec::new();
    let mut i = 0;
    for text in body {
        // Removed tokens are `not`s; anything unmatched is an inserted `not`.
        while i < n && s.tokens[i].text != *text && is_not(&s.tokens[i]) {
            i += 1;
        }
        if i < n && s.tokens[i].text == *text {
            map[i] = tokens.len();
            tokens.push((s.tokens[i].clone(), false));
            i += 1;
        } else {
            assert!(text.eq_ignore_ascii_case("not"), "unexpected token `{text}`");
            let t = Token {
                text: text.clone(),
                lemma: "not".into(),
                pos: "PART".into(),
                tag: "RB".into(),
                dep: "neg".into(),
                head: 0,
            };
            tokens.push((t, true));
        }
    }
    assert!(s.tokens[i..n].iter().all(is_not), "only `not` may be removed");
    for (k, t) in s.tokens[n..].iter().enumerate() {
        map[n + k] = tokens.len();
        tokens.push((t.clone(), false));
    }
    let tokens = tokens
        .into_iter()
        .enumerate()
        .map(|(j, (mut t, fresh))| {
            t.head = if fresh { j + 1 } else { map[t.head] };
            t
        })
        .collect();
    AnnotatedSentence { tokens }
}

/// Sentences on which negation toggling is expected to undo itself.
fn involution_applies(s: &AnnotatedSentence, propagate: bool) -> bool {
    let n = body_len(s);
    let body = &s.tokens[..n];
    let Some(aux) = body.iter().position(|t| t.pos == "AUX" || t.tag == "MD") else {
        return false;
    };
    let nots: Vec<usize> = (0..n).filter(|&i| is_not(&body[i])).collect();
    if nots.is_empty() {
        return true;
    }
    if nots[0] != aux + 1 {
        return false;
    }
    if !propagate {
        return nots.len() == 1;
    }
    let verb = body[aux].head;
    let mut expected = vec![aux + 1];
    for (c, t) in body.iter().enumerate() {
        if c != verb && c > aux + 1 && t.head == verb && t.dep == "conj" && t.pos == "VERB" {
            expected.push(c - 1);
        }
    }
    expected.sort_unstable();
    nots == expected
}

pub struct DistractorSummary {
    pub sentences: usize,
    pub involution_checked: usize,
    pub candidate_sets: usize,
    pub deletion_rate: f64,
    pub mask_rate: f64,
    pub chi_square: f64,
    pub p_value: f64,
}

/// A single sentence of at least `min_len` body tokens built from the
/// fixtures, followed by a full stop.
pub fn long_sentence(corpus: &[AnnotatedSentence], min_len: usize) -> AnnotatedSentence {
    let mut tokens = Vec::new();
    for s in corpus {
        if tokens.len() >= min_len {
            break;
        }
        tokens.extend(s.tokens[..body_len(s)].iter().cloned());
    }
    let mut stop = tokens.last().unwrap().clone();
    stop.text = ".".into();
    stop.pos = "PUNCT".into();
    tokens.push(stop);
    AnnotatedSentence { tokens }
}

pub fn distractor_properties(corpus: &[AnnotatedSentence], trials: usize) -> Result<DistractorSummary, String> {
    let cfg = DistractorConfig::with_seed(5);
    let mut involution_checked = 0;
    for (i, s) in corpus.iter().enumerate() {
        let qid = format!("fixture:{i}");
        let original = raw_tokens(&s.text());

        for round in 0..8 {
            let qid = format!("{qid}:{round}");
            let mut r = keyed_rng(cfg.seed, &qid, DistractorKind::RandomMasking);
            let masked = apply_kind(DistractorKind::RandomMasking, s, &cfg, &mut r).unwrap();
            ensure!(raw_tokens(&masked).len() == original.len(), "masking changed the token count of `{}`", s.text());
            ensure!(masked.contains(&cfg.mask_token), "masking left `{}` untouched", s.text());

            let mut r = keyed_rng(cfg.seed, &qid, DistractorKind::WordReordering);
            if let Some(reordered) = apply_kind(DistractorKind::WordReordering, s, &cfg, &mut r) {
                ensure!(
                    sorted(raw_tokens(&reordered)) == sorted(original.clone()),
                    "reordering `{}` gave `{reordered}`",
                    s.text()
                );
            }

            let mut r = keyed_rng(cfg.seed, &qid, DistractorKind::RandomDeletion);
            if let Some(kept) = random_deletion(s, cfg.deletion_prob, &mut r) {
                let kept: HashSet<usize> = kept.into_iter().collect();
                for (k, t) in s.tokens[..body_len(s)].iter().enumerate() {
                    ensure!(
                        kept.contains(&k) || !PROTECTED_POS.contains(&t.pos.as_str()),
                        "deletion removed {} `{}` from `{}`",
                        t.pos,
                        t.text,
                        s.text()
                    );
                }
                ensure!(!kept.is_empty(), "deletion emptied `{}`", s.text());
            }

            let mut r = keyed_rng(cfg.seed, &qid, DistractorKind::SpanDeletion);
            if let Some(span) = span_deletion(s, cfg.span_lambda, &mut r) {
                ensure!(
                    span.len >= 1 && span.len < body_len(s) && span.start + span.len <= body_len(s),
                    "bad span {span:?} for `{}`",
                    s.text()
                );
            }
        }

        for propagate in [false, true] {
            if !involution_applies(s, propagate) {
                continue;
            }
            let once = not_negation(s, propagate).unwrap();
            let twice = not_negation(&reannotate(s, &once), propagate).unwrap();
            let body: Vec<&str> = s.tokens[..body_len(s)].iter().map(|t| t.text.as_str()).collect();
            ensure!(
                twice.iter().map(String::as_str).eq(body.iter().copied()),
                "negating `{}` twice gave `{}` (propagate {propagate})",
                s.text(),
                twice.join(" ")
            );
            involution_checked += 1;
        }

        let set = build_candidate_set(&qid, &s.text(), s, &cfg);
        let mut seen = HashSet::from([set.positive.as_str()]);
        for d in &set.distractors {
            ensure!(seen.insert(&d.text), "{} distractor `{}` repeats an earlier candidate", d.kind.name(), d.text);
        }
    }

    let long = long_sentence(corpus, 30);
    let n = body_len(&long);
    let deletable = long.tokens[..n].iter().filter(|t| !PROTECTED_POS.contains(&t.pos.as_str())).count();
    let mut r = rng(99);
    let (mut deleted, mut masked) = (0usize, 0usize);
    for _ in 0..trials {
        deleted += n - random_deletion(&long, cfg.deletion_prob, &mut r).unwrap().len();
        masked += random_masking(&long, cfg.mask_prob, &mut r).iter().filter(|&&m| m).count();
    }
    let deletion_rate = deleted as f64 / (deletable * trials) as f64;
    let mask_rate = masked as f64 / (n * trials) as f64;
    ensure!((deletion_rate - 0.2).abs() <= 0.01, "deletion rate {deletion_rate:.4}");
    ensure!((mask_rate - 0.2).abs() <= 0.01, "mask rate {mask_rate:.4}");

    let (chi_square, p_value) = poisson_fit(&long, cfg.span_lambda, trials);
    ensure!(p_value > 0.01, "span lengths reject Poisson: chi2 {chi_square:.2}, p {p_value:.4}");

    Ok(DistractorSummary {
        sentences: corpus.len(),
        involution_checked,
        candidate_sets: corpus.len(),
        deletion_rate,
        mask_rate,
        chi_square,
        p_value,
    })
}

/// Pearson chi-square of the drawn span lengths (before clamping) against
/// Poisson(lambda), bins `0..=7` and `8+`.
pub fn poisson_fit(s: &AnnotatedSentence, lambda: f64, draws: usize) -> (f64, f64) {
    const TOP: usize = 8;
    let mut observed = [0usize; TOP + 1];
    let mut r = rng(1234);
    for _ in 0..draws {
        let span = span_deletion(s, lambda, &mut r).unwrap();
        observed[(span.raw_len as usize).min(TOP)] += 1;
    }
    let dist = Poisson::new(lambda).unwrap();
    let mut chi = 0.0;
    for (k, &o) in observed.iter().enumerate() {
        let p = if k < TOP { dist.pmf(k as u64) } else { dist.sf(TOP as u64 - 1) };
        let e = p * draws as f64;
        chi += (o as f64 - e).powi(2) / e;
    }
    let p_value = ChiSquared::new(TOP as f64).unwrap().sf(chi);
    (chi, p_value)
}

/// Digest and size of every artifact of one end-to-end run.
pub fn pipeline(seed: u64) -> Result<Vec<(&'static str, Vec<u8>, usize)>, String> {
    let err = |e: sentanalog::Error| e.to_string();
    let templates = assets::templates();
    let mut pairs = gen_semantic(&templates, &assets::semantic_word_pairs(), &assets::word_classes()).map_err(err)?;
    pairs.extend(gen_nationality(&templates, &assets::word_pairs(category::NATIONALITY_ADJECTIVE).unwrap()).map_err(err)?);
    let corpus = sentanalog::annotation::load_annotated(fixture("syntactic_sample.jsonl")).map_err(err)?;
    let lex = assets::lexicon();
    pairs.extend(gen_comparative(&corpus, &lex.base_forms));
    pairs.extend(gen_opposite(&corpus, &lex.antonyms));
    pairs.extend(gen_plural(&corpus, &lex.singular_forms));
    pairs.extend(gen_verb_conjugation(&corpus, &lex.inflections));
    let mut questions = expand_questions(&pairs);

    let file = std::fs::File::open(fixture("relation_rows.jsonl")).map_err(|e| e.to_string())?;
    let rows = read_relation_rows(std::io::BufReader::new(file), "relation_rows.jsonl").map_err(err)?;
    let relation = relation_pairs(&rows, "relation_rows.jsonl").map_err(err)?;
    let dataset = build_relation_questions(&relation, &annotations_from_rows(&rows), &DistractorConfig::with_seed(seed)).map_err(err)?;
    questions.extend(dataset.questions.iter().cloned());
    pairs.extend(relation);

    let tok = TokenizerConfig::default();
    let mut texts: Vec<&str> = Vec::new();
    let mut seen = HashSet::new();
    for q in &questions {
        for item in [&q.a, &q.b, &q.c, &q.gold_d] {
            if seen.insert(&**item) {
                texts.push(item);
            }
        }
        if let CandidateScope::Explicit { items } = &q.candidate_scope {
            for item in items {
                if seen.insert(&**item) {
                    texts.push(item);
                }
            }
        }
    }
    let sentences: Vec<TokenizedSentence> = texts.iter().map(|t| tokenize_sentence(*t, t, &tok)).collect();
    let mut vocab: Vec<&str> = sentences.iter().flat_map(|s| s.tokens.iter().map(String::as_str)).collect();
    vocab.sort_unstable();
    vocab.dedup();
    let mut r = rng(seed);
    let words = table_from(vocab.iter().map(|w| (w.to_string(), gaussian(&mut r, 25))).collect());
    let embeddings = encode_all(&sentences, &words, STRICT, EncoderMethod::Avg).map_err(err)?;

    let mut predictions = Vec::new();
    for (metric, constrained) in CONFIGS {
        let solver = Solver::new(&embeddings, SolverConfig::new(metric, constrained)).map_err(err)?;
        predictions.extend(solver.solve_batch(&questions).map_err(err)?);
    }
    let report = build_report(&predictions, &questions, Some(&pairs)).map_err(err)?;

    let mut out = Vec::new();
    let mut blob = |name: &'static str, f: &mut dyn FnMut(&mut Vec<u8>)| {
        let mut buf = Vec::new();
        f(&mut buf);
        out.push((name, Sha256::digest(&buf).to_vec(), buf.len()));
    };
    blob("pairs", &mut |b| write_jsonl(b, &pairs).unwrap());
    blob("questions", &mut |b| write_jsonl(b, &questions).unwrap());
    blob("candidate_sets", &mut |b| write_jsonl(b, &dataset.candidate_sets).unwrap());
    blob("embeddings", &mut |b| write_sentence_embeddings(&embeddings, b).unwrap());
    blob("predictions", &mut |b| write_jsonl(b, &predictions).unwrap());
    for (name, format) in [("report.csv", ReportFormat::Csv), ("report.json", ReportFormat::Json), ("report.md", ReportFormat::Markdown)] {
        blob(name, &mut |b| report.emit(format, b).unwrap());
    }
    Ok(out)
}

fn relation_candidate_sets(seed: u64) -> Result<Vec<sentanalog::CandidateSet>, String> {
    let err = |e: sentanalog::Error| e.to_string();
    let file = std::fs::File::open(fixture("relation_rows.jsonl")).map_err(|e| e.to_string())?;
    let rows = read_relation_rows(std::io::BufReader::new(file), "relation_rows.jsonl").map_err(err)?;
    let pairs = relation_pairs(&rows, "relation_rows.jsonl").map_err(err)?;
    let ds = build_relation_questions(&pairs, &annotations_from_rows(&rows), &DistractorConfig::with_seed(seed)).map_err(err)?;
    Ok(ds.candidate_sets)
}

pub fn determinism() -> Check {
    let first = pipeline(42)?;
    let second = pipeline(42)?;
    for ((name, a, _), (_, b, _)) in first.iter().zip(&second) {
        ensure!(a == b, "{name} differs between runs");
    }
    ensure!(
        relation_candidate_sets(42)? != relation_candidate_sets(43)?,
        "candidate sets ignore the seed"
    );
    let bytes: usize = first.iter().map(|(_, _, n)| n).sum();
    Ok(format!("{} artifacts, {bytes} bytes, identical across runs", first.len()))
}
