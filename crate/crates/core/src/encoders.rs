//! Sentence embeddings built from word vectors.
//!
//! * [`encode_average`]: component-wise mean of the word vectors.
//! * [`encode_sqrt_sum`]: sum of the word vectors divided by `sqrt(N)`.
//! * [`encode_dct`]: orthonormal DCT-II along the word axis, computed per
//!   embedding dimension, keeping coefficients `0..=K` concatenated.
//!
//! With orthonormal scaling `c_0 = sqrt(N) * mean`, so a `K = 0` DCT
//! encoding and the mean encoding point in the same direction and give the
//! same cosine similarities.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::store::{EmbeddingTable, OovMode, OovPolicy, TableBuilder};

const TERMINAL_PUNCT: [char; 4] = ['.', ',', '!', '?'];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenizerConfig {
    pub lowercase: bool,
    pub split_punctuation: bool,
}

impl Default for TokenizerConfig {
    fn default() -> Self {
        TokenizerConfig {
            lowercase: true,
            split_punctuation: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenizedSentence {
    pub id: String,
    pub tokens: Vec<String>,
}

impl TokenizedSentence {
    pub fn new(id: impl Into<String>, tokens: Vec<String>) -> Self {
        TokenizedSentence {
            id: id.into(),
            tokens,
        }
    }
}

/// Whitespace tokenization with `. , ! ?` split off the end of each word.
pub fn tokenize(text: &str, cfg: &TokenizerConfig) -> Vec<String> {
    let text = if cfg.lowercase {
        text.to_lowercase()
    } else {
        text.to_owned()
    };
    let mut out = Vec::new();
    for word in text.split_whitespace() {
        if !cfg.split_punctuation {
            out.push(word.to_owned());
            continue;
        }
        let core = word.trim_end_matches(TERMINAL_PUNCT);
        if !core.is_empty() {
            out.push(core.to_owned());
        }
        out.extend(word[core.len()..].chars().map(String::from));
    }
    out
}

pub fn tokenize_sentence(id: impl Into<String>, text: &str, cfg: &TokenizerConfig) -> TokenizedSentence {
    TokenizedSentence::new(id, tokenize(text, cfg))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DctConfig {
    /// Highest coefficient index kept; the output has `(k + 1) * dim` components.
    pub k: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "method")]
pub enum EncoderMethod {
    Avg,
    SqrtSum,
    Dct { k: usize },
}

impl EncoderMethod {
    pub fn output_dim(&self, word_dim: usize) -> usize {
        match self {
            EncoderMethod::Avg | EncoderMethod::SqrtSum => word_dim,
            EncoderMethod::Dct { k } => (k + 1) * word_dim,
        }
    }
}

/// Resolves the retained word vectors of a sentence under the OOV policy.
fn retained_vectors<'t>(
    sentence: &TokenizedSentence,
    words: &'t EmbeddingTable,
    policy: OovPolicy,
) -> Result<Vec<Option<&'t [f64]>>> {
    let mut out = Vec::with_capacity(sentence.tokens.len());
    for token in &sentence.tokens {
        match words.get(token) {
            Some(v) => out.push(Some(v)),
            None => {
                if policy.report {
                    log::warn!("out-of-vocabulary token `{token}` in `{}`", sentence.id);
                }
                match policy.mode {
                    OovMode::Error => {
                        return Err(Error::OutOfVocabulary {
                            sentence: sentence.id.clone(),
                            token: token.clone(),
                        })
                    }
                    OovMode::SkipToken => {}
                    // `None` stands for a zero vector.
                    OovMode::ZeroVector => out.push(None),
                }
            }
        }
    }
    if out.is_empty() {
        return Err(Error::EmptySentence(sentence.id.clone()));
    }
    Ok(out)
}

fn summed(rows: &[Option<&[f64]>], dim: usize) -> Vec<f64> {
    let mut sum = vec![0.0; dim];
    for v in rows.iter().flatten() {
        for (s, x) in sum.iter_mut().zip(v.iter()) {
            *s += x;
        }
    }
    sum
}

pub fn encode_average(sentence: &TokenizedSentence, words: &EmbeddingTable, policy: OovPolicy) -> Result<Vec<f64>> {
    let rows = retained_vectors(sentence, words, policy)?;
    let n = rows.len() as f64;
    let mut v = summed(&rows, words.dim());
    v.iter_mut().for_each(|x| *x /= n);
    Ok(v)
}

pub fn encode_sqrt_sum(sentence: &TokenizedSentence, words: &EmbeddingTable, policy: OovPolicy) -> Result<Vec<f64>> {
    let rows = retained_vectors(sentence, words, policy)?;
    let scale = (rows.len() as f64).sqrt();
    let mut v = summed(&rows, words.dim());
    v.iter_mut().for_each(|x| *x /= scale);
    Ok(v)
}

/// Orthonormal DCT-II coefficients `0..=K` of the word-vector sequence.
///
/// Sequences shorter than `K + 1` are zero-padded to `K + 1` before the
/// transform, so the output length depends only on `K` and the word dimension.
pub fn encode_dct(
    sentence: &TokenizedSentence,
    words: &EmbeddingTable,
    policy: OovPolicy,
    cfg: DctConfig,
) -> Result<Vec<f64>> {
    let rows = retained_vectors(sentence, words, policy)?;
    Ok(dct_coefficients(&rows, words.dim(), cfg.k))
}

fn dct_coefficients(rows: &[Option<&[f64]>], dim: usize, k_max: usize) -> Vec<f64> {
    let n = rows.len().max(k_max + 1);
    let nf = n as f64;
    let mut out = vec![0.0; (k_max + 1) * dim];

    let dc_scale = (1.0 / nf).sqrt();
    let ac_scale = (2.0 / nf).sqrt();
    for k in 0..=k_max {
        let coef = &mut out[k * dim..(k + 1) * dim];
        for (pos, row) in rows.iter().enumerate() {
            let Some(v) = row else { continue };
            let basis = if k == 0 {
                1.0
            } else {
                (PI * (2 * pos + 1) as f64 * k as f64 / (2.0 * nf)).cos()
            };
            for (c, x) in coef.iter_mut().zip(v.iter()) {
                *c += x * basis;
            }
        }
        let scale = if k == 0 { dc_scale } else { ac_scale };
        coef.iter_mut().for_each(|c| *c *= scale);
    }
    out
}

pub fn encode(
    sentence: &TokenizedSentence,
    words: &EmbeddingTable,
    policy: OovPolicy,
    method: EncoderMethod,
) -> Result<Vec<f64>> {
    match method {
        EncoderMethod::Avg => encode_average(sentence, words, policy),
        EncoderMethod::SqrtSum => encode_sqrt_sum(sentence, words, policy),
        EncoderMethod::Dct { k } => encode_dct(sentence, words, policy, DctConfig { k }),
    }
}

/// Encodes every sentence into a table keyed by sentence id. Repeated ids
/// keep their first occurrence.
pub fn encode_all(
    sentences: &[TokenizedSentence],
    words: &EmbeddingTable,
    policy: OovPolicy,
    method: EncoderMethod,
) -> Result<EmbeddingTable> {
    let out_dim = method.output_dim(words.dim());
    let mut builder = TableBuilder::with_capacity(out_dim, sentences.len());
    for s in sentences {
        if builder.contains(&s.id) {
            continue;
        }
        builder.push(s.id.clone(), encode(s, words, policy, method)?)?;
    }
    Ok(builder.finish_with_dim(out_dim))
}
