//! Distractor transforms for relation-based candidate sets.
//!
//! Every random draw comes from a ChaCha8 stream keyed by
//! `(seed, question id, transform kind)`, so a candidate set does not depend
//! on generation order or thread count.
//!
//! A sentence-final `.`, `!` or `?` token is held out of every transform and
//! re-attached afterwards, as long as something else remains.

use std::collections::{HashMap, HashSet};
use std::io::Write;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::annotation::{detokenize, is_terminal_punct, AnnotatedSentence, Token};
use crate::datagen::{expand_questions, AnalogyQuestion, CandidateScope, RelationRow, SentencePair};
use crate::error::{Error, Result};

pub const MAX_ATTEMPTS: usize = 32;

/// Coarse POS tags that random deletion never removes.
pub const PROTECTED_POS: [&str; 4] = ["ADJ", "ADV", "DET", "AUX"];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DistractorConfig {
    pub seed: u64,
    pub deletion_prob: f64,
    pub mask_prob: f64,
    pub span_lambda: f64,
    pub span_count: usize,
    pub mask_token: String,
    /// Also negate verbs coordinated with the first auxiliary's verb.
    pub propagate_conjuncts: bool,
}

impl Default for DistractorConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            deletion_prob: 0.2,
            mask_prob: 0.2,
            span_lambda: 3.0,
            span_count: 1,
            mask_token: "[MASK]".into(),
            propagate_conjuncts: false,
        }
    }
}

impl DistractorConfig {
    pub fn with_seed(seed: u64) -> Self {
        Self { seed, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, p) in [("deletion_prob", self.deletion_prob), ("mask_prob", self.mask_prob)] {
            if !(p > 0.0 && p < 1.0) {
                return Err(Error::Config(format!("{name} must lie in (0, 1), got {p}")));
            }
        }
        if !(self.span_lambda > 0.0 && self.span_lambda.is_finite()) {
            return Err(Error::Config(format!("span_lambda must be positive, got {}", self.span_lambda)));
        }
        if self.span_count == 0 {
            return Err(Error::Config("span_count must be at least 1".into()));
        }
        if self.mask_token.is_empty() {
            return Err(Error::Config("mask_token must not be empty".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistractorKind {
    NotNegation,
    RandomDeletion,
    RandomMasking,
    SpanDeletion,
    WordReordering,
}

impl DistractorKind {
    pub const ALL: [DistractorKind; 5] = [
        DistractorKind::NotNegation,
        DistractorKind::RandomDeletion,
        DistractorKind::RandomMasking,
        DistractorKind::SpanDeletion,
        DistractorKind::WordReordering,
    ];

    pub fn name(self) -> &'static str {
        match self {
            DistractorKind::NotNegation => "not_negation",
            DistractorKind::RandomDeletion => "random_deletion",
            DistractorKind::RandomMasking => "random_masking",
            DistractorKind::SpanDeletion => "span_deletion",
            DistractorKind::WordReordering => "word_reordering",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Distractor {
    pub kind: DistractorKind,
    pub text: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CandidateSet {
    pub qid: String,
    pub positive: String,
    pub distractors: Vec<Distractor>,
}

impl CandidateSet {
    /// Positive first, then distractors in kind order.
    pub fn items(&self) -> impl Iterator<Item = &str> {
        std::iter::once(self.positive.as_str()).chain(self.distractors.iter().map(|d| d.text.as_str()))
    }
}

/// Independent RNG stream for one (question, transform) combination.
pub fn keyed_rng(seed: u64, qid: &str, kind: DistractorKind) -> ChaCha8Rng {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update((qid.len() as u64).to_le_bytes());
    h.update(qid.as_bytes());
    h.update(kind.name().as_bytes());
    let digest = h.finalize();
    let mut key = [0u8; 32];
    key.copy_from_slice(&digest);
    ChaCha8Rng::from_seed(key)
}

/// Number of leading tokens the transforms may touch.
pub fn body_len(s: &AnnotatedSentence) -> usize {
    match s.tokens.last() {
        Some(t) if s.tokens.len() > 1 && is_terminal_punct(&t.text) => s.tokens.len() - 1,
        _ => s.tokens.len(),
    }
}

fn render<'a>(s: &'a AnnotatedSentence, body: impl IntoIterator<Item = &'a str>) -> String {
    let tail = s.tokens[body_len(s)..].iter().map(|t| t.text.as_str());
    detokenize(body.into_iter().chain(tail))
}

fn is_not(t: &Token) -> bool {
    t.text.eq_ignore_ascii_case("not")
}

fn is_auxiliary(t: &Token) -> bool {
    t.pos == "AUX" || t.tag == "MD"
}

/// Verbs coordinated with `head` that share its auxiliary.
fn verb_conjuncts(s: &AnnotatedSentence, head: usize) -> Vec<usize> {
    s.tokens
        .iter()
        .enumerate()
        .filter(|(i, t)| *i != head && t.head == head && t.dep == "conj" && t.pos == "VERB")
        .map(|(i, _)| i)
        .collect()
}

/// Removes the first `not` if there is one, else inserts `not` after the
/// first auxiliary. `None` when neither applies.
pub fn not_negation(s: &AnnotatedSentence, propagate_conjuncts: bool) -> Option<Vec<String>> {
    let n = body_len(s);
    let body = &s.tokens[..n];
    let texts = body.iter().map(|t| t.text.clone());

    if let Some(first) = body.iter().position(is_not) {
        let mut drop = HashSet::from([first]);
        if propagate_conjuncts {
            let verb = body.get(first + 1).map(|t| t.head).unwrap_or(first);
            for c in verb_conjuncts(s, verb) {
                if c > 0 && c - 1 < n && is_not(&body[c - 1]) {
                    drop.insert(c - 1);
                }
            }
        }
        return Some(texts.enumerate().filter(|(i, _)| !drop.contains(i)).map(|(_, t)| t).collect());
    }

    let aux = body.iter().position(is_auxiliary)?;
    let mut insert_before = vec![aux + 1];
    if propagate_conjuncts {
        insert_before.extend(verb_conjuncts(s, body[aux].head).into_iter().filter(|&c| c > aux + 1 && c < n));
    }
    let mut out = Vec::with_capacity(n + insert_before.len());
    for (i, t) in texts.enumerate() {
        if insert_before.contains(&i) {
            out.push("not".to_owned());
        }
        out.push(t);
    }
    if insert_before.contains(&n) {
        out.push("not".to_owned());
    }
    Some(out)
}

/// Indices of body tokens kept by random deletion, or `None` when every
/// token is protected.
pub fn random_deletion<R: Rng>(s: &AnnotatedSentence, p: f64, rng: &mut R) -> Option<Vec<usize>> {
    let n = body_len(s);
    let deletable: Vec<usize> = (0..n).filter(|&i| !PROTECTED_POS.contains(&s.tokens[i].pos.as_str())).collect();
    if deletable.is_empty() {
        return None;
    }
    let mut deleted: Vec<usize> = deletable.iter().copied().filter(|_| rng.random::<f64>() < p).collect();
    if deleted.is_empty() && n < 5 {
        deleted.push(deletable[rng.random_range(0..deletable.len())]);
    }
    if deleted.len() == n {
        let restore = rng.random_range(0..deleted.len());
        deleted.remove(restore);
    }
    let deleted: HashSet<usize> = deleted.into_iter().collect();
    Some((0..n).filter(|i| !deleted.contains(i)).collect())
}

/// Per-token mask flags over the body, redrawn until at least one is set.
pub fn random_masking<R: Rng>(s: &AnnotatedSentence, p: f64, rng: &mut R) -> Vec<bool> {
    let n = body_len(s);
    loop {
        let flags: Vec<bool> = (0..n).map(|_| rng.random::<f64>() < p).collect();
        if flags.iter().any(|&f| f) {
            return flags;
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Span {
    pub start: usize,
    pub len: usize,
    /// Poisson draw before clamping.
    pub raw_len: u64,
}

/// One contiguous span with Poisson length clamped to `[1, N-1]`.
pub fn span_deletion<R: Rng>(s: &AnnotatedSentence, lambda: f64, rng: &mut R) -> Option<Span> {
    let n = body_len(s);
    if n < 2 {
        return None;
    }
    let poisson = Poisson::new(lambda).ok()?;
    let raw_len = poisson.sample(rng) as u64;
    let len = (raw_len as usize).clamp(1, n - 1);
    let start = rng.random_range(0..=n - len);
    Some(Span { start, len, raw_len })
}

/// Pivot for `tokens[pivot..] ++ tokens[..pivot]`, chosen among pivots that
/// change the text.
pub fn word_reordering<R: Rng>(s: &AnnotatedSentence, rng: &mut R) -> Option<usize> {
    let n = body_len(s);
    let texts: Vec<&str> = s.tokens[..n].iter().map(|t| t.text.as_str()).collect();
    let pivots: Vec<usize> = (1..n)
        .filter(|&p| texts[p..].iter().chain(&texts[..p]).ne(texts.iter()))
        .collect();
    if pivots.is_empty() {
        return None;
    }
    Some(pivots[rng.random_range(0..pivots.len())])
}

/// Applies one transform and renders the result; `None` if inapplicable.
pub fn apply<R: Rng>(kind: DistractorKind, s: &AnnotatedSentence, cfg: &DistractorConfig, rng: &mut R) -> Option<String> {
    let body: Vec<&str> = s.tokens[..body_len(s)].iter().map(|t| t.text.as_str()).collect();
    match kind {
        DistractorKind::NotNegation => {
            let toks = not_negation(s, cfg.propagate_conjuncts)?;
            Some(render(s, toks.iter().map(String::as_str)))
        }
        DistractorKind::RandomDeletion => {
            let kept = random_deletion(s, cfg.deletion_prob, rng)?;
            Some(render(s, kept.into_iter().map(|i| body[i])))
        }
        DistractorKind::RandomMasking => {
            let flags = random_masking(s, cfg.mask_prob, rng);
            Some(render(
                s,
                body.iter().zip(flags).map(|(t, m)| if m { cfg.mask_token.as_str() } else { *t }),
            ))
        }
        DistractorKind::SpanDeletion => {
            let mut removed = vec![false; body.len()];
            for _ in 0..cfg.span_count {
                let remaining: Vec<usize> = (0..body.len()).filter(|&i| !removed[i]).collect();
                if remaining.len() < 2 {
                    break;
                }
                let view = AnnotatedSentence {
                    tokens: remaining.iter().map(|&i| s.tokens[i].clone()).collect(),
                };
                let span = span_deletion(&view, cfg.span_lambda, rng)?;
                for &i in &remaining[span.start..span.start + span.len] {
                    removed[i] = true;
                }
            }
            Some(render(
                s,
                body.iter().zip(&removed).filter(|(_, r)| !**r).map(|(t, _)| *t),
            ))
        }
        DistractorKind::WordReordering => {
            let p = word_reordering(s, rng)?;
            Some(render(s, body[p..].iter().chain(&body[..p]).copied()))
        }
    }
}

/// The positive plus at most one distractor per applicable kind. A kind
/// whose draws keep colliding with the positive or an earlier distractor is
/// dropped after [`MAX_ATTEMPTS`] tries.
pub fn build_candidate_set(qid: &str, positive: &str, annotation: &AnnotatedSentence, cfg: &DistractorConfig) -> CandidateSet {
    let mut seen: HashSet<String> = HashSet::from([positive.to_owned(), annotation.text()]);
    let mut distractors = Vec::with_capacity(DistractorKind::ALL.len());
    for kind in DistractorKind::ALL {
        let mut rng = keyed_rng(cfg.seed, qid, kind);
        let mut accepted = None;
        for _ in 0..MAX_ATTEMPTS {
            match apply(kind, annotation, cfg, &mut rng) {
                None => break,
                Some(text) if !seen.contains(&text) => {
                    accepted = Some(text);
                    break;
                }
                Some(_) if kind == DistractorKind::NotNegation => break,
                Some(_) => {}
            }
        }
        match accepted {
            Some(text) => {
                seen.insert(text.clone());
                distractors.push(Distractor { kind, text });
            }
            None => log::debug!("{qid}: no {} distractor for `{positive}`", kind.name()),
        }
    }
    CandidateSet {
        qid: qid.to_owned(),
        positive: positive.to_owned(),
        distractors,
    }
}

/// Annotations keyed by sentence text, taken from relation rows.
pub fn annotations_from_rows(rows: &[RelationRow]) -> HashMap<String, AnnotatedSentence> {
    let mut out = HashMap::new();
    for r in rows {
        if let Some(a) = &r.premise_annotation {
            out.entry(r.premise.clone()).or_insert_with(|| a.clone());
        }
        if let Some(a) = &r.hypothesis_annotation {
            out.entry(r.hypothesis.clone()).or_insert_with(|| a.clone());
        }
    }
    out
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct RelationDataset {
    pub questions: Vec<AnalogyQuestion>,
    pub candidate_sets: Vec<CandidateSet>,
}

/// Expands relation pairs into questions whose candidates are the gold
/// sentence and its distractors.
pub fn build_relation_questions(
    pairs: &[SentencePair],
    annotations: &HashMap<String, AnnotatedSentence>,
    cfg: &DistractorConfig,
) -> Result<RelationDataset> {
    cfg.validate()?;
    let mut questions = expand_questions(pairs);
    if let Some(q) = questions.iter().find(|q| !annotations.contains_key(&*q.gold_d)) {
        return Err(Error::Annotation(format!("no annotation for target sentence `{}`", q.gold_d)));
    }
    let candidate_sets: Vec<CandidateSet> = questions
        .par_iter()
        .map(|q| build_candidate_set(&q.qid, &q.gold_d, &annotations[&*q.gold_d], cfg))
        .collect();
    let mut interner = HashMap::<String, std::sync::Arc<str>>::new();
    for (q, set) in questions.iter_mut().zip(&candidate_sets) {
        let items = set
            .items()
            .map(|t| {
                if t == &*q.gold_d {
                    return q.gold_d.clone();
                }
                interner.entry(t.to_owned()).or_insert_with(|| std::sync::Arc::from(t)).clone()
            })
            .collect();
        q.candidate_scope = CandidateScope::Explicit { items };
    }
    Ok(RelationDataset {
        questions,
        candidate_sets,
    })
}

/// Span-deletion distractors as `qid TAB positive TAB distractor` rows for
/// manual review.
pub fn write_span_review<W: Write>(sets: &[CandidateSet], writer: W) -> std::io::Result<()> {
    let mut w = std::io::BufWriter::new(writer);
    writeln!(w, "qid\tpositive\tspan_deletion")?;
    for set in sets {
        for d in set.distractors.iter().filter(|d| d.kind == DistractorKind::SpanDeletion) {
            writeln!(w, "{}\t{}\t{}", set.qid, set.positive, d.text)?;
        }
    }
    w.flush()
}
